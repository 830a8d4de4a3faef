import java.util.List;
import java.util.stream.Collectors;

public class Streams {
    public String joined(List<String> xs) {
        return xs.stream().filter(s -> !s.isEmpty()).collect(Collectors.joining(", "));
    }

    public List<Integer> lengths(List<String> xs) {
        return xs.stream().map(String::length).collect(Collectors.toList());
    }
}

import java.util.Arrays;
import java.util.Collections;
import java.util.List;

public class Arrays2 {
    public int[] sorted(int[] xs) {
        int[] copy = Arrays.copyOf(xs, xs.length);
        Arrays.sort(copy);
        return copy;
    }

    public List<String> shuffled(List<String> xs) {
        Collections.shuffle(xs);
        return Collections.unmodifiableList(xs);
    }
}

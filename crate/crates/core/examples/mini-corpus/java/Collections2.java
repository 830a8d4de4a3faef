import com.google.common.collect.ImmutableList;
import com.google.common.collect.Lists;
import java.util.List;

public class Collections2 {
    public List<String> frozen(List<String> xs) {
        return ImmutableList.copyOf(xs);
    }

    public List<List<Integer>> chunks(List<Integer> xs, int size) {
        return Lists.partition(xs, size);
    }

    public List<String> reversed(List<String> xs) {
        return Lists.reverse(xs);
    }
}

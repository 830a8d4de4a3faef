import java.util.Objects;
import com.google.common.base.Preconditions;

public class Checks {
    public String name(String s) {
        Objects.requireNonNull(s, "name");
        Preconditions.checkArgument(!s.isEmpty(), "empty name");
        return s;
    }

    public int index(int i, int size) {
        return Preconditions.checkElementIndex(i, size);
    }
}

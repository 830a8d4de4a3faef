import java.util.regex.Matcher;
import java.util.regex.Pattern;

public class Patterns {
    private static final Pattern WORD = Pattern.compile("[A-Za-z]+");

    public int countWords(String s) {
        Matcher m = WORD.matcher(s);
        int n = 0;
        while (m.find()) {
            n++;
        }
        return n;
    }

    public String squash(String s) {
        return s.replaceAll("\\s+", " ");
    }
}

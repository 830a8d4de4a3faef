import org.apache.commons.lang3.StringUtils;

public class Strings {
    public static String title(String s) {
        return StringUtils.capitalize(StringUtils.trimToEmpty(s));
    }

    public static boolean blank(String s) {
        return StringUtils.isBlank(s);
    }

    public static String pad(String s, int width) {
        return StringUtils.leftPad(s, width, '0');
    }
}

import java.nio.charset.StandardCharsets;
import java.util.Base64;

public class Encoding {
    public String encode(String s) {
        return Base64.getEncoder().encodeToString(s.getBytes(StandardCharsets.UTF_8));
    }

    public String decode(String s) {
        byte[] raw = Base64.getDecoder().decode(s);
        return new String(raw, StandardCharsets.UTF_8);
    }
}

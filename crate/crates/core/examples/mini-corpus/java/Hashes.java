import java.security.MessageDigest;
import java.util.HexFormat;

public class Hashes {
    public static String sha256(byte[] data) throws Exception {
        MessageDigest md = MessageDigest.getInstance("SHA-256");
        byte[] out = md.digest(data);
        return HexFormat.of().formatHex(out);
    }
}

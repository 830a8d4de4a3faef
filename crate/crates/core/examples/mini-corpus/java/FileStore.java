import java.io.IOException;
import java.nio.charset.StandardCharsets;
import java.nio.file.Files;
import java.nio.file.Path;
import java.nio.file.Paths;

public class FileStore {
    public String load(String name) throws IOException {
        Path p = Paths.get("data", name);
        return Files.readString(p, StandardCharsets.UTF_8);
    }

    public void save(String name, String body) throws IOException {
        Path p = Paths.get("data", name);
        Files.createDirectories(p.getParent());
        Files.writeString(p, body);
    }
}

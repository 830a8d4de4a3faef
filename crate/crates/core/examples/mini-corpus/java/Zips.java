import java.io.FileOutputStream;
import java.io.IOException;
import java.util.zip.ZipEntry;
import java.util.zip.ZipOutputStream;

public class Zips {
    public void single(String path, String name, byte[] body) throws IOException {
        try (ZipOutputStream zip = new ZipOutputStream(new FileOutputStream(path))) {
            zip.putNextEntry(new ZipEntry(name));
            zip.write(body);
            zip.closeEntry();
        }
    }
}

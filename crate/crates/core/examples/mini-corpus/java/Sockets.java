import java.io.IOException;
import java.net.InetSocketAddress;
import java.net.Socket;

public class Sockets {
    public boolean reachable(String host, int port) {
        try (Socket s = new Socket()) {
            s.connect(new InetSocketAddress(host, port), 2000);
            return true;
        } catch (IOException e) {
            return false;
        }
    }
}

import java.util.Random;
import java.util.concurrent.ThreadLocalRandom;

public class Randoms {
    public int roll(long seed) {
        Random r = new Random(seed);
        return r.nextInt(6) + 1;
    }

    public double jitter() {
        return ThreadLocalRandom.current().nextDouble(0.9, 1.1);
    }
}

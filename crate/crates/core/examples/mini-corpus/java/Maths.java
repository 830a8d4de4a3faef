import java.math.BigDecimal;
import java.math.RoundingMode;

public class Maths {
    public BigDecimal share(BigDecimal total, int parts) {
        return total.divide(BigDecimal.valueOf(parts), 2, RoundingMode.HALF_UP);
    }

    public double hypot(double a, double b) {
        return Math.sqrt(Math.pow(a, 2) + Math.pow(b, 2));
    }
}

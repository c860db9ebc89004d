import java.util.function.BooleanSupplier;

public class Poller {
    private final long intervalMillis;

    public Poller(long intervalMillis) {
        this.intervalMillis = intervalMillis;
    }

    public boolean await(BooleanSupplier ready, int attempts) throws Exception {
        for (int i = 0; i < attempts; i++) {
            if (ready.getAsBoolean()) {
                return true;
            }
            try {
                Thread.sleep(intervalMillis);
            } catch (InterruptedException e) {
                Thread.currentThread().interrupt();
                return false;
            }
        }
        return false;
    }
}

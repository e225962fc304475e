import time


class Timer:
    def __init__(self) -> None:
        self.start = 0.0
        self.elapsed = 0.0

    def begin(self) -> None:
        self.start = time.time()

    def stop(self) -> float:
        self.elapsed = time.time() - self.start
        return self.elapsed

    def millis(self) -> int:
        return int(self.elapsed * 1000)

    def label(self) -> str:
        return str(self.millis()) + " ms"


def measure(fn, *args) -> float:
    t = Timer()
    t.begin()
    fn(*args)
    return t.stop()


def wait(seconds: float):
    time.sleep(seconds)

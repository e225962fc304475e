def mean(values: list[float]) -> float:
    if not values:
        return 0.0
    return sum(values) / len(values)


def halve(n: int) -> int:
    return n / 2


def clamp(x: int, lo: int, hi: int) -> int:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def sign(x: int) -> int:
    if x > 0:
        return 1
    elif x < 0:
        return -1


def square(x):
    return x * x

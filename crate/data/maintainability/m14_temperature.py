def c_to_f(c: float) -> float:
    return c * 9 / 5 + 32


def f_to_c(f: float) -> float:
    return (f - 32) * 5 / 9


def describe(t: float) -> str:
    if t < 0:
        return "freezing"
    if t < 20:
        return "cold"
    return "warm"


def round_temp(t: float) -> int:
    return round(t, 1)


def parse_temp(text: str) -> float:
    return float(text.strip())


def warmest(temps: list[float]) -> float:
    best = temps[0]
    for t in temps:
        if t > best:
            best = t
    return best


def report(temps: list[float]) -> None:
    for t in temps:
        print(describe(t))
    return len(temps)

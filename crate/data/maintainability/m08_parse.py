def parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        return 0


def parse_pair(text: str) -> tuple[str, str]:
    left, _, right = text.partition("=")
    return [left, right]


def parse_flag(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes"):
        return True
    if lowered in ("0", "false", "no"):
        return False


def split_csv(line):
    return line.split(",")


def parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise

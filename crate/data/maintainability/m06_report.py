def format_row(name: str, score: int) -> str:
    return f"{name:<10}{score:>5}"


def format_table(rows: list[tuple[str, int]]) -> str:
    lines = []
    for name, score in rows:
        lines.append(format_row(name, score))
    return "\n".join(lines)


def header() -> None:
    return "NAME      SCORE"


def footer(count: int) -> str:
    print("rows:", count)
    return


def main() -> None:
    rows = [("ann", 3), ("bob", 5)]
    print(header())
    print(format_table(rows))

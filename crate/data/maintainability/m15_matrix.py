def zeros(n: int, m: int) -> list[list[int]]:
    return [[0] * m for _ in range(n)]


def transpose(mat: list[list[int]]) -> list[list[int]]:
    rows = len(mat)
    cols = len(mat[0])
    out = zeros(cols, rows)
    for i in range(rows):
        for j in range(cols):
            out[j][i] = mat[i][j]
    return out


def trace(mat: list[list[int]]) -> int:
    total = 0
    for i in range(len(mat)):
        total += mat[i][i]
    return total


def shape(mat: list[list[int]]) -> tuple[int, int]:
    return len(mat), len(mat[0])


def is_square(mat) -> bool:
    return len(mat) == len(mat[0])


def flatten(mat: list[list[int]]) -> list[int]:
    flat: list[int] = []
    for row in mat:
        flat.extend(row)
    return "flat"

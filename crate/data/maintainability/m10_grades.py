def letter(score: int) -> str:
    if score >= 90:
        return "A"
    if score >= 80:
        return "B"
    if score >= 70:
        return "C"
    return "F"


def average(scores: list[int]) -> int:
    return sum(scores) / len(scores)


def passed(score: int) -> bool:
    return score >= 60


def summary(scores):
    best = max(scores)
    return "best: " + str(best)


def curve(score: int, bonus: int) -> int:
    if score + bonus > 100:
        return 100
    else:
        return score + bonus

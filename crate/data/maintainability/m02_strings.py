def shout(text: str) -> str:
    return text.upper() + "!"


def count_vowels(text: str) -> int:
    n = 0
    for ch in text:
        if ch in "aeiou":
            n += 1
    return n


def initials(name: str) -> str:
    parts = name.split()
    return len(parts)


def pad(text, width: int) -> str:
    return text.ljust(width)


def banner(title: str):
    line = "=" * len(title)
    print(line)
    print(title)

def word_count(text: str) -> dict[str, int]:
    counts: dict[str, int] = {}
    for word in text.split():
        counts[word] = counts.get(word, 0) + 1
    return counts


def longest(words: list[str]) -> str:
    best = ""
    for w in words:
        if len(w) > len(best):
            best = w
    return best


def is_palindrome(word: str) -> bool:
    cleaned = word.lower()
    return cleaned == cleaned[::-1]


def capitalize_all(words: list[str]) -> list[str]:
    return [w.capitalize() for w in words]


def join_words(words: list[str], sep):
    return sep.join(words)


def vowel_ratio(word: str) -> int:
    vowels = 0
    for ch in word:
        if ch in "aeiou":
            vowels += 1
    return vowels / len(word)

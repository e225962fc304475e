def linear_search(items: list[int], target: int) -> int:
    for i in range(len(items)):
        if items[i] == target:
            return i
    return -1


def binary_search(items: list[int], target: int) -> int:
    lo = 0
    hi = len(items) - 1
    while lo <= hi:
        mid = (lo + hi) // 2
        if items[mid] == target:
            return mid
        if items[mid] < target:
            lo = mid + 1
        else:
            hi = mid - 1


def contains(items: list[int], target: int) -> bool:
    return linear_search(items, target) >= 0


def first_even(items: list[int]) -> int:
    for x in items:
        if x % 2 == 0:
            return x
    return "none"

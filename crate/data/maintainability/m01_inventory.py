from typing import Optional


class Inventory:
    def __init__(self) -> None:
        self.items: dict[str, int] = {}

    def add(self, name: str, count: int) -> None:
        self.items[name] = self.items.get(name, 0) + count

    def remove(self, name, count):
        current = self.items.get(name, 0)
        self.items[name] = current - count

    def total(self) -> int:
        return sum(self.items.values())

    def lookup(self, name: str) -> Optional[int]:
        if name in self.items:
            return self.items[name]
        return None


def describe(inv: Inventory) -> str:
    return "inventory with " + str(inv.total()) + " items"

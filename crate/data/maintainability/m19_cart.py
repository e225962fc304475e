class Item:
    def __init__(self, name: str, price: float, qty: int) -> None:
        self.name = name
        self.price = price
        self.qty = qty

    def subtotal(self) -> float:
        return self.price * self.qty


class Cart:
    def __init__(self) -> None:
        self.items: list[Item] = []

    def add(self, item: Item) -> None:
        self.items.append(item)

    def total(self) -> float:
        total = 0.0
        for item in self.items:
            total += item.subtotal()
        return total

    def count(self) -> int:
        return len(self.items)

    def discount(self, code: str) -> float:
        if code == "HALF":
            return 0.5
        if code == "TENTH":
            return 0.1

    def checkout(self, code: str) -> str:
        return self.total() * (1 - self.discount(code))

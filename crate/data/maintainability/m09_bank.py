class InsufficientFunds(Exception):
    pass


class Account:
    def __init__(self, owner: str, balance: int = 0) -> None:
        self.owner = owner
        self.balance = balance

    def deposit(self, amount: int) -> int:
        self.balance += amount
        return self.balance

    def withdraw(self, amount: int) -> int:
        if amount > self.balance:
            raise InsufficientFunds(self.owner)
        self.balance -= amount
        return self.balance

    def statement(self) -> str:
        return self.owner + ": " + self.balance

    @staticmethod
    def fee(amount) -> int:
        return amount // 100

    @classmethod
    def empty(cls, owner: str) -> "Account":
        return cls(owner)

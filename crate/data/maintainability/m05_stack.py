class Stack:
    def __init__(self, capacity: int):
        self.capacity = capacity
        self.data: list[int] = []

    def push(self, item: int) -> bool:
        if len(self.data) >= self.capacity:
            return False
        self.data.append(item)
        return True

    def pop(self) -> int:
        if self.data:
            return self.data.pop()

    def size(self) -> int:
        return len(self.data)

    def is_empty(self) -> bool:
        return len(self.data) == 0

from collections import deque


class TaskQueue:
    def __init__(self) -> None:
        self.pending: deque[str] = deque()
        self.done: list[str] = []

    def submit(self, task: str) -> None:
        self.pending.append(task)

    def run_next(self) -> str:
        if not self.pending:
            return ""
        task = self.pending.popleft()
        self.done.append(task)
        return task

    def drain(self) -> int:
        count = 0
        while self.pending:
            self.run_next()
            count += 1
        return count

    def status(self):
        return len(self.pending), len(self.done)

import sys


class Logger:
    def __init__(self, name: str, level: int = 0) -> None:
        self.name = name
        self.level = level

    def log(self, level: int, message: str) -> None:
        if level >= self.level:
            sys.stderr.write(self.name + ": " + message + "\n")

    def info(self, message: str) -> None:
        self.log(1, message)

    def error(self, message) -> None:
        self.log(3, message)

    def child(self, suffix: str) -> "Logger":
        return Logger(self.name + "." + suffix, self.level)

    def enabled(self, level: int) -> bool:
        if level >= self.level:
            return True

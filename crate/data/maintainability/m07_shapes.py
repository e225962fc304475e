class Rect:
    def __init__(self, w: float, h: float) -> None:
        self.w = w
        self.h = h

    def area(self) -> float:
        return self.w * self.h

    def perimeter(self) -> float:
        return 2 * (self.w + self.h)

    def describe(self) -> str:
        return "rect " + str(self.w) + "x" + str(self.h)


class Square(Rect):
    def __init__(self, side):
        super().__init__(side, side)

    def diagonal(self) -> float:
        return self.w * 1.4142


def total_area(shapes: list[Rect]) -> float:
    total = 0.0
    for s in shapes:
        total += s.area()
    return total

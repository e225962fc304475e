filename = input()
with open(filename) as fh:
    print(fh.read())

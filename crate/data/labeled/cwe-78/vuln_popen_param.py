import os


def disk_usage(path):
    stream = os.popen("du -sh {}".format(path))
    return stream.read().strip()

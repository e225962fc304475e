import os
import sys

target = sys.argv[1]
if os.path.exists(target):
    os.remove(target)

import os
import shlex

name = input()
os.system("ls -l " + shlex.quote(name))

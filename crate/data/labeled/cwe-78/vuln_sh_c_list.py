import subprocess

cmd = input()
subprocess.call(["sh", "-c", cmd])

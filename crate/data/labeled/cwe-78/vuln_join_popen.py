import subprocess


def archive(name):
    parts = ["tar", "czf", name + ".tgz", name]
    cmd = " ".join(parts)
    proc = subprocess.Popen(cmd, shell=True)
    return proc.wait()

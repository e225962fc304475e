import subprocess


def ping(host):
    args = ["ping", "-c", "1"]
    args.append(host)
    return subprocess.check_output(args, shell=False)

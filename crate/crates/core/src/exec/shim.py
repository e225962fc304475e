import os
import sys


def _read_nonce():
    path = os.environ.pop("PA_NONCE_FILE", "")
    try:
        with open(path) as fh:
            return fh.read().strip()
    except OSError:
        return ""
    finally:
        try:
            os.unlink(path)
        except OSError:
            pass


_NONCE = _read_nonce()
_MODE = os.environ.pop("PA_SHIM_MODE", "script")
_ENTRY = os.environ.pop("PA_ENTRY", "")
_FD = os.dup(2)


def _trailer(status, exc):
    try:
        sys.stdout.flush()
    except BaseException:
        pass
    try:
        sys.stderr.flush()
    except BaseException:
        pass
    line = "\n%s|status=%s|exc=%s\n" % (_NONCE, status, exc)
    try:
        os.write(_FD, line.encode("ascii", "replace"))
    finally:
        os._exit(0)


def _block_network():
    import socket

    class _NoSocket(socket.socket):
        def connect(self, *a, **k):
            raise OSError("network disabled in sandbox")

        connect_ex = connect

    def _refuse(*a, **k):
        raise OSError("network disabled in sandbox")

    socket.socket = _NoSocket
    socket.create_connection = _refuse


def _arg(text):
    import ast

    try:
        return ast.literal_eval(text)
    except Exception:
        return text


def _run(path, argv):
    import runpy

    if _MODE == "check":
        with open(path, "rb") as fh:
            compile(fh.read(), path, "exec")
        return
    sys.argv = [path] + argv
    if _MODE == "entry":
        ns = runpy.run_path(path, run_name="__candidate__")
        fn = ns.get(_ENTRY)
        if not callable(fn):
            raise NameError("entry point %r not defined" % _ENTRY)
        result = fn(*[_arg(a) for a in argv])
        if result is not None:
            print(result)
    else:
        runpy.run_path(path, run_name="__main__")


def _main():
    status, exc = "clean", "-"
    try:
        _block_network()
        _run(sys.argv[1], sys.argv[2:])
    except SystemExit as e:
        if e.code not in (None, 0):
            status, exc = "crashed", "SystemExit"
    except BaseException as e:
        name = "".join(c for c in type(e).__name__ if c.isascii() and (c.isalnum() or c in "_."))
        status, exc = "crashed", name[:80] or "Exception"
        try:
            import traceback

            traceback.print_exc(limit=8)
        except BaseException:
            pass
    _trailer(status, exc)


try:
    _main()
except BaseException:
    _trailer("crashed", "ShimError")

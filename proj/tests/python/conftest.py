import os
import shutil
import subprocess
import sys
import time
from pathlib import Path

import pytest

# ctest points this at build/python so the suite runs without installing.
if os.environ.get("VILAS_PYTHONPATH"):
    sys.path.insert(0, os.environ["VILAS_PYTHONPATH"])

REPO = Path(__file__).resolve().parents[2]


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("VILAS_CLI") or shutil.which("vilas")
    if not path:
        pytest.skip("vilas executable not available")
    return path


class Proc:
    """A vilas subprocess whose first stdout lines announce its addresses."""

    def __init__(self, args, lines):
        self.p = subprocess.Popen(args, stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
        self.addr = {}
        deadline = time.monotonic() + 10
        while len(self.addr) < lines and time.monotonic() < deadline:
            line = self.p.stdout.readline()
            if not line:
                break
            name, value = line.split()[:2]
            self.addr[name] = value
        if len(self.addr) < lines:
            self.stop()
            raise RuntimeError(f"{args[1]} did not start: {self.p.stderr.read()}")

    def stop(self):
        if self.p.poll() is None:
            self.p.send_signal(2)
            try:
                self.p.wait(10)
            except subprocess.TimeoutExpired:
                self.p.kill()
        return self.p.returncode


@pytest.fixture
def devices(cli):
    d = Proc([cli, "devices", "--arm-port", "0", "--gripper-port", "0", "--camera-port", "0", "--seed", "5"], 3)
    yield d
    d.stop()

"""
The command-line pipeline
=========================

Runs every ``glrtml`` command in a scratch directory with a small config and
prints what each one produced.  Equivalent shell session::

    glrtml gen --config run.toml
    glrtml train --config run.toml
    glrtml adapt --config run.toml
    glrtml eval --config run.toml --metric cosine
"""
import os
import subprocess
import sys
import tempfile

CONFIG = """\
seed = 5

[synth]
num_classes = 4
per_class = 40

[train]
t0 = 20
t1_minus_t0 = 10
d = 8
hidden = 16

[adapt]
k = 5

[eval]
k_list = [1, 10]
"""

with tempfile.TemporaryDirectory() as root:
    with open(os.path.join(root, "run.toml"), "w") as fh:
        fh.write(CONFIG)
    steps = [["gen"], ["train"], ["adapt"], ["eval"], ["eval", "--metric", "cosine"], ["roc"], ["score"]]
    for step in steps:
        proc = subprocess.run([sys.executable, "-m", "glrtml", *step, "--config", "run.toml"],
                              cwd=root, capture_output=True, text=True)
        print(f"$ glrtml {' '.join(step)}  (exit {proc.returncode})")
        print(proc.stdout.strip()[:400])
    print(sorted(os.listdir(os.path.join(root, "out"))))

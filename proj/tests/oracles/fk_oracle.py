"""Standalone forward-kinematics oracle for the default 6-joint chain.

Composes 4x4 homogeneous transforms with numpy. Kept independent of the C++
implementation: the chain layout is spelled out here by hand.

    base yaw -> shoulder pitch -> L1 -> elbow pitch -> L2 -> wrist pitch -> L3
    -> wrist roll -> wrist yaw

A positive pitch lifts the local +x axis toward +z.
"""
import math
import sys

import numpy as np

L1, L2, L3 = 0.425, 0.395, 0.102


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0, 0], [s, c, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]], float)


def rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1]], float)


def pitch(a):
    # rotation about +y by -a
    c, s = math.cos(-a), math.sin(-a)
    return np.array([[c, 0, s, 0], [0, 1, 0, 0], [-s, 0, c, 0], [0, 0, 0, 1]], float)


def trans_x(d):
    m = np.eye(4)
    m[0, 3] = d
    return m


def fk(q):
    t = rot_z(q[0]) @ pitch(q[1]) @ trans_x(L1) @ pitch(q[2]) @ trans_x(L2)
    t = t @ pitch(q[3]) @ trans_x(L3) @ rot_x(q[4]) @ rot_z(q[5])
    return t[0, 3], t[1, 3], t[2, 3], math.atan2(t[1, 0], t[0, 0])


if __name__ == "__main__":
    q = [float(v) for v in sys.argv[1:]] or [0.3, -0.4, 0.7, -0.3, 0.0, 0.1]
    print("%.17g %.17g %.17g %.17g" % fk(q))

"""Numerical-quadrature oracle for the bilinear quad element.

Integrates B^T D B over a unit square with 2x2 Gauss points, plane stress.
Node order (top-left, top-right, bottom-right, bottom-left) in (column, row)
coordinates with the row index increasing downward.
"""

import numpy as np


def quad_element_stiffness(E, nu, size=1.0):
    coords = size * np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    D = E / (1 - nu ** 2) * np.array([
        [1.0, nu, 0.0],
        [nu, 1.0, 0.0],
        [0.0, 0.0, (1 - nu) / 2],
    ])
    g = 1.0 / np.sqrt(3.0)
    K = np.zeros((8, 8))
    for xi in (-g, g):
        for eta in (-g, g):
            dN = 0.25 * np.array([
                [-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)],
                [-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)],
            ])
            J = dN @ coords
            dNxy = np.linalg.solve(J, dN)
            B = np.zeros((3, 8))
            B[0, 0::2] = dNxy[0]
            B[1, 1::2] = dNxy[1]
            B[2, 0::2] = dNxy[1]
            B[2, 1::2] = dNxy[0]
            K += B.T @ D @ B * np.linalg.det(J)
    return K

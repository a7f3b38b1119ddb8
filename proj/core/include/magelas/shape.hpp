#pragma once

// Quadratic Lagrange shape functions on the reference triangle and segment.
//
// Triangle node order: corners 0,1,2 then edge midpoints (01), (12), (20),
// matching both the mesh cell layout and the Gmsh 6-node triangle.

namespace magelas {

// N[6] values and dN[6][2] reference-coordinate gradients at (x,y).
inline void p2_shape(double x, double y, double N[6], double dN[6][2]) {
    const double l1 = 1.0 - x - y, l2 = x, l3 = y;
    N[0] = l1 * (2.0 * l1 - 1.0);
    N[1] = l2 * (2.0 * l2 - 1.0);
    N[2] = l3 * (2.0 * l3 - 1.0);
    N[3] = 4.0 * l1 * l2;
    N[4] = 4.0 * l2 * l3;
    N[5] = 4.0 * l3 * l1;
    // dl1 = (-1,-1), dl2 = (1,0), dl3 = (0,1)
    dN[0][0] = -(4.0 * l1 - 1.0);
    dN[0][1] = -(4.0 * l1 - 1.0);
    dN[1][0] = 4.0 * l2 - 1.0;
    dN[1][1] = 0.0;
    dN[2][0] = 0.0;
    dN[2][1] = 4.0 * l3 - 1.0;
    dN[3][0] = 4.0 * (l1 - l2);
    dN[3][1] = -4.0 * l2;
    dN[4][0] = 4.0 * l3;
    dN[4][1] = 4.0 * l2;
    dN[5][0] = -4.0 * l3;
    dN[5][1] = 4.0 * (l1 - l3);
}

// Quadratic segment with nodes at t = 0, 1/2, 1 (order: end, mid, end).
inline void p2_line_shape(double t, double N[3], double dN[3]) {
    N[0] = (1.0 - t) * (1.0 - 2.0 * t);
    N[1] = 4.0 * t * (1.0 - t);
    N[2] = t * (2.0 * t - 1.0);
    dN[0] = 4.0 * t - 3.0;
    dN[1] = 4.0 - 8.0 * t;
    dN[2] = 4.0 * t - 1.0;
}

}  // namespace magelas

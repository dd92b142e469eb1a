"""Generate the channel-with-circular-obstacle mesh used by the test suite.

Channel [-10, 10] x [-3, 3], circular obstacle of radius 0.5 at the origin,
discretized by an inscribed polygon with `--segments` edges. The interior is
meshed with gmsh's Delaunay algorithm. The default far-field size and grading
distance reproduce the 1601-triangle coarse mesh.

Physical groups: 1 Gamma_in, 2 Gamma_out, 3 Gamma_ns, 4 Gamma_d, 10 fluid.

Usage: python3 tools/gen_channel_mesh.py --segments 141 -o meshes/channel_coarse.msh
"""
import argparse
import math

import gmsh


def build(segments, far_size, grading):
    gmsh.model.add("channel")
    geo = gmsh.model.geo
    r = 0.5
    hc = 2.0 * math.pi * r / segments
    corners = [(-10, -3), (10, -3), (10, 3), (-10, 3)]
    cp = [geo.addPoint(x, y, 0, far_size) for x, y in corners]
    bottom = geo.addLine(cp[0], cp[1])
    right = geo.addLine(cp[1], cp[2])
    top = geo.addLine(cp[2], cp[3])
    left = geo.addLine(cp[3], cp[0])
    outer = geo.addCurveLoop([bottom, right, top, left])
    pts = [
        geo.addPoint(r * math.cos(2 * math.pi * k / segments), r * math.sin(2 * math.pi * k / segments), 0, hc)
        for k in range(segments)
    ]
    arcs = [geo.addLine(pts[k], pts[(k + 1) % segments]) for k in range(segments)]
    inner = geo.addCurveLoop(arcs)
    surf = geo.addPlaneSurface([outer, inner])
    geo.synchronize()

    gmsh.model.addPhysicalGroup(1, [left], 1)
    gmsh.model.setPhysicalName(1, 1, "Gamma_in")
    gmsh.model.addPhysicalGroup(1, [right], 2)
    gmsh.model.setPhysicalName(1, 2, "Gamma_out")
    gmsh.model.addPhysicalGroup(1, [bottom, top], 3)
    gmsh.model.setPhysicalName(1, 3, "Gamma_ns")
    gmsh.model.addPhysicalGroup(1, arcs, 4)
    gmsh.model.setPhysicalName(1, 4, "Gamma_d")
    gmsh.model.addPhysicalGroup(2, [surf], 10)
    gmsh.model.setPhysicalName(2, 10, "fluid")

    dist = gmsh.model.mesh.field.add("Distance")
    gmsh.model.mesh.field.setNumbers(dist, "CurvesList", arcs)
    thr = gmsh.model.mesh.field.add("Threshold")
    gmsh.model.mesh.field.setNumber(thr, "InField", dist)
    gmsh.model.mesh.field.setNumber(thr, "SizeMin", hc)
    gmsh.model.mesh.field.setNumber(thr, "SizeMax", far_size)
    gmsh.model.mesh.field.setNumber(thr, "DistMin", 0.0)
    gmsh.model.mesh.field.setNumber(thr, "DistMax", grading)
    gmsh.model.mesh.field.setAsBackgroundMesh(thr)
    gmsh.option.setNumber("Mesh.MeshSizeExtendFromBoundary", 0)
    gmsh.option.setNumber("Mesh.MeshSizeFromPoints", 0)
    gmsh.option.setNumber("Mesh.MeshSizeFromCurvature", 0)
    gmsh.option.setNumber("Mesh.Algorithm", 5)  # Delaunay
    gmsh.option.setNumber("Mesh.RandomFactor", 1e-9)
    gmsh.model.mesh.generate(2)
    _, tags, _ = gmsh.model.mesh.getElements(2)
    return sum(len(t) for t in tags)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--segments", type=int, default=141)
    ap.add_argument("--far-size", type=float, default=1.199125)
    ap.add_argument("--grading", type=float, default=3.1)
    ap.add_argument("--expect-triangles", type=int, default=1601)
    ap.add_argument("-o", "--output", required=True)
    args = ap.parse_args()

    gmsh.initialize()
    gmsh.option.setNumber("General.Terminal", 0)
    n = build(args.segments, args.far_size, args.grading)
    if args.expect_triangles and n != args.expect_triangles:
        raise SystemExit(f"got {n} triangles, expected {args.expect_triangles}")
    gmsh.option.setNumber("Mesh.MshFileVersion", 2.2)
    gmsh.option.setNumber("Mesh.Binary", 0)
    gmsh.option.setNumber("Mesh.SaveAll", 0)
    gmsh.write(args.output)
    gmsh.finalize()
    print(f"{n} triangles written to {args.output}")


if __name__ == "__main__":
    main()

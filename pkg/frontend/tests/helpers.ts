import { Primitive, Scene } from "../src/scene.js";

/** All primitives of one kind, with the union narrowed. */
export function prims<K extends Primitive["kind"]>(
  scene: Scene,
  kind: K,
): Extract<Primitive, { kind: K }>[] {
  return scene.primitives.filter(
    (p): p is Extract<Primitive, { kind: K }> => p.kind === kind);
}

/** Every text string in the scene. */
export function texts(scene: Scene): string[] {
  return prims(scene, "text").map((p) => p.text);
}

/** A synthetic refinement ladder CSV with error columns E = C * h^p. */
export function ladderCsv(
  cols: { name: string; c: number; p: number }[],
  levels = [16, 32, 64, 128, 256],
): string {
  const header = ["N", "h", ...cols.map((c) => `err_${c.name}`)].join(",");
  const lines = levels.map((n) => {
    const h = 4 / n;
    const cells = cols.map((c) => (c.c * Math.pow(h, c.p)).toExponential(12));
    return [n, h, ...cells].join(",");
  });
  return [header, ...lines].join("\n") + "\n";
}

import type { ParsedMesh } from "./types.js";

/** Minimal OBJ reader for the service's triangle meshes (v/f lines only). */
export function parseObj(text: string): ParsedMesh {
  const verts: number[] = [];
  const faces: number[] = [];
  for (const line of text.split("\n")) {
    if (line.startsWith("v ")) {
      const [x, y, z] = line.slice(2).trim().split(/\s+/).map(Number);
      verts.push(x, y, z);
    } else if (line.startsWith("f ")) {
      const ids = line.slice(2).trim().split(/\s+/)
        .map((tok) => parseInt(tok.split("/")[0], 10) - 1);
      for (let i = 2; i < ids.length; i++) {
        faces.push(ids[0], ids[i - 1], ids[i]);
      }
    }
  }
  return { vertices: new Float64Array(verts), faces: new Uint32Array(faces) };
}

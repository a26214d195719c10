import type { ParsedMesh, PointInfo } from "./types.js";

const VERT_SRC = `
attribute vec3 aPos;
attribute vec3 aNormal;
uniform mat4 uMvp;
uniform mat4 uModel;
varying vec3 vNormal;
void main() {
  gl_Position = uMvp * vec4(aPos, 1.0);
  vNormal = mat3(uModel) * aNormal;
  gl_PointSize = 6.0;
}`;

const FRAG_SRC = `
precision mediump float;
varying vec3 vNormal;
uniform vec3 uColor;
uniform float uFlat;
void main() {
  vec3 n = normalize(vNormal);
  float diffuse = max(dot(n, normalize(vec3(0.4, 0.6, 1.0))), 0.0);
  vec3 c = uColor * (0.25 + 0.75 * diffuse);
  gl_FragColor = vec4(mix(c, uColor, uFlat), 1.0);
}`;

function compile(gl: WebGLRenderingContext, kind: number, src: string): WebGLShader {
  const sh = gl.createShader(kind)!;
  gl.shaderSource(sh, src);
  gl.compileShader(sh);
  if (!gl.getShaderParameter(sh, gl.COMPILE_STATUS)) {
    throw new Error(gl.getShaderInfoLog(sh) ?? "shader compile failed");
  }
  return sh;
}

function mat4Mul(a: Float32Array, b: Float32Array): Float32Array {
  const out = new Float32Array(16);
  for (let c = 0; c < 4; c++) {
    for (let r = 0; r < 4; r++) {
      let s = 0;
      for (let k = 0; k < 4; k++) s += a[k * 4 + r] * b[c * 4 + k];
      out[c * 4 + r] = s;
    }
  }
  return out;
}

function perspective(fovy: number, aspect: number, near: number, far: number): Float32Array {
  const f = 1 / Math.tan(fovy / 2);
  const m = new Float32Array(16);
  m[0] = f / aspect;
  m[5] = f;
  m[10] = (far + near) / (near - far);
  m[11] = -1;
  m[14] = (2 * far * near) / (near - far);
  return m;
}

/** Shaded surface mesh with orbit/zoom camera and point markers. */
export class MeshView {
  private gl: WebGLRenderingContext;
  private program: WebGLProgram;
  private vbo: WebGLBuffer;
  private nbo: WebGLBuffer;
  private pbo: WebGLBuffer;
  private nIndices = 0;
  private nPoints = 0;
  private center: [number, number, number] = [0, 0, 0];
  private radius = 1;
  private yaw = 0.7;
  private pitch = 0.4;
  private zoom = 2.8;
  versionBadge = -1;
  stale = false;

  constructor(private canvas: HTMLCanvasElement) {
    const gl = canvas.getContext("webgl");
    if (!gl) throw new Error("WebGL unavailable");
    this.gl = gl;
    const prog = gl.createProgram()!;
    gl.attachShader(prog, compile(gl, gl.VERTEX_SHADER, VERT_SRC));
    gl.attachShader(prog, compile(gl, gl.FRAGMENT_SHADER, FRAG_SRC));
    gl.linkProgram(prog);
    if (!gl.getProgramParameter(prog, gl.LINK_STATUS)) {
      throw new Error(gl.getProgramInfoLog(prog) ?? "link failed");
    }
    this.program = prog;
    this.vbo = gl.createBuffer()!;
    this.nbo = gl.createBuffer()!;
    this.pbo = gl.createBuffer()!;
    this.bindOrbit();
  }

  private bindOrbit(): void {
    let dragging = false;
    let last: [number, number] = [0, 0];
    this.canvas.addEventListener("mousedown", (e) => {
      dragging = true;
      last = [e.clientX, e.clientY];
    });
    window.addEventListener("mouseup", () => (dragging = false));
    window.addEventListener("mousemove", (e) => {
      if (!dragging) return;
      this.yaw += (e.clientX - last[0]) * 0.01;
      this.pitch = Math.max(-1.4, Math.min(1.4, this.pitch + (e.clientY - last[1]) * 0.01));
      last = [e.clientX, e.clientY];
      this.draw();
    });
    this.canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.zoom = Math.max(1.2, Math.min(8, this.zoom * (e.deltaY > 0 ? 1.1 : 0.9)));
      this.draw();
    });
  }

  setMesh(mesh: ParsedMesh, version: number): void {
    const gl = this.gl;
    const nv = mesh.vertices.length / 3;
    const pos = new Float32Array(mesh.vertices);
    const normals = new Float32Array(pos.length);
    // area-weighted vertex normals from face cross products
    const f = mesh.faces;
    for (let t = 0; t < f.length; t += 3) {
      const [a, b, c] = [f[t] * 3, f[t + 1] * 3, f[t + 2] * 3];
      const ux = pos[b] - pos[a], uy = pos[b + 1] - pos[a + 1], uz = pos[b + 2] - pos[a + 2];
      const vx = pos[c] - pos[a], vy = pos[c + 1] - pos[a + 1], vz = pos[c + 2] - pos[a + 2];
      const nx = uy * vz - uz * vy, ny = uz * vx - ux * vz, nz = ux * vy - uy * vx;
      for (const i of [f[t] * 3, f[t + 1] * 3, f[t + 2] * 3]) {
        normals[i] += nx;
        normals[i + 1] += ny;
        normals[i + 2] += nz;
      }
    }
    // expand to per-corner arrays (no index buffer needed for small meshes)
    const tri = new Float32Array(f.length * 3);
    const triN = new Float32Array(f.length * 3);
    for (let i = 0; i < f.length; i++) {
      const s = f[i] * 3;
      tri.set(pos.subarray(s, s + 3), i * 3);
      triN.set(normals.subarray(s, s + 3), i * 3);
    }
    gl.bindBuffer(gl.ARRAY_BUFFER, this.vbo);
    gl.bufferData(gl.ARRAY_BUFFER, tri, gl.STATIC_DRAW);
    gl.bindBuffer(gl.ARRAY_BUFFER, this.nbo);
    gl.bufferData(gl.ARRAY_BUFFER, triN, gl.STATIC_DRAW);
    this.nIndices = f.length;

    let cx = 0, cy = 0, cz = 0;
    for (let i = 0; i < pos.length; i += 3) {
      cx += pos[i];
      cy += pos[i + 1];
      cz += pos[i + 2];
    }
    this.center = [cx / nv, cy / nv, cz / nv];
    let r = 0;
    for (let i = 0; i < pos.length; i += 3) {
      r = Math.max(r, Math.hypot(pos[i] - this.center[0], pos[i + 1] - this.center[1],
                                 pos[i + 2] - this.center[2]));
    }
    this.radius = Math.max(r, 1e-3);
    this.versionBadge = version;
    this.stale = false;
    this.draw();
  }

  markStale(): void {
    this.stale = true;
  }

  setPoints(points: PointInfo[]): void {
    const arr = new Float32Array(points.length * 3);
    points.forEach((p, i) => arr.set([p.x_mm, p.y_mm, p.z_mm], i * 3));
    const gl = this.gl;
    gl.bindBuffer(gl.ARRAY_BUFFER, this.pbo);
    gl.bufferData(gl.ARRAY_BUFFER, arr, gl.STATIC_DRAW);
    this.nPoints = points.length;
    this.draw();
  }

  private viewMatrix(): Float32Array {
    const [cx, cy, cz] = this.center;
    const d = this.zoom * this.radius;
    const cy_ = Math.cos(this.yaw), sy = Math.sin(this.yaw);
    const cp = Math.cos(this.pitch), sp = Math.sin(this.pitch);
    const eye = [cx + d * cp * cy_, cy + d * cp * sy, cz + d * sp];
    const f = [cx - eye[0], cy - eye[1], cz - eye[2]];
    const fl = Math.hypot(f[0], f[1], f[2]);
    f.forEach((_, i) => (f[i] /= fl));
    const upw = [0, 0, 1];
    const s = [f[1] * upw[2] - f[2] * upw[1], f[2] * upw[0] - f[0] * upw[2],
               f[0] * upw[1] - f[1] * upw[0]];
    const sl = Math.hypot(s[0], s[1], s[2]) || 1;
    s.forEach((_, i) => (s[i] /= sl));
    const u = [s[1] * f[2] - s[2] * f[1], s[2] * f[0] - s[0] * f[2], s[0] * f[1] - s[1] * f[0]];
    const m = new Float32Array(16);
    m.set([s[0], u[0], -f[0], 0, s[1], u[1], -f[1], 0, s[2], u[2], -f[2], 0, 0, 0, 0, 1]);
    m[12] = -(s[0] * eye[0] + s[1] * eye[1] + s[2] * eye[2]);
    m[13] = -(u[0] * eye[0] + u[1] * eye[1] + u[2] * eye[2]);
    m[14] = f[0] * eye[0] + f[1] * eye[1] + f[2] * eye[2];
    return m;
  }

  draw(): void {
    const gl = this.gl;
    const w = this.canvas.width, h = this.canvas.height;
    gl.viewport(0, 0, w, h);
    gl.clearColor(0.07, 0.07, 0.1, 1);
    gl.enable(gl.DEPTH_TEST);
    gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
    if (!this.nIndices) return;
    gl.useProgram(this.program);
    const proj = perspective(0.8, w / h, 0.1, this.radius * 40);
    const mvp = mat4Mul(proj, this.viewMatrix());
    const ident = new Float32Array([1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1]);
    gl.uniformMatrix4fv(gl.getUniformLocation(this.program, "uMvp"), false, mvp);
    gl.uniformMatrix4fv(gl.getUniformLocation(this.program, "uModel"), false, ident);

    const aPos = gl.getAttribLocation(this.program, "aPos");
    const aNormal = gl.getAttribLocation(this.program, "aNormal");
    gl.bindBuffer(gl.ARRAY_BUFFER, this.vbo);
    gl.enableVertexAttribArray(aPos);
    gl.vertexAttribPointer(aPos, 3, gl.FLOAT, false, 0, 0);
    gl.bindBuffer(gl.ARRAY_BUFFER, this.nbo);
    gl.enableVertexAttribArray(aNormal);
    gl.vertexAttribPointer(aNormal, 3, gl.FLOAT, false, 0, 0);
    gl.uniform3f(gl.getUniformLocation(this.program, "uColor"),
                 this.stale ? 0.6 : 0.85, 0.25, 0.25);
    gl.uniform1f(gl.getUniformLocation(this.program, "uFlat"), 0);
    gl.drawArrays(gl.TRIANGLES, 0, this.nIndices);

    if (this.nPoints) {
      gl.bindBuffer(gl.ARRAY_BUFFER, this.pbo);
      gl.vertexAttribPointer(aPos, 3, gl.FLOAT, false, 0, 0);
      gl.vertexAttribPointer(aNormal, 3, gl.FLOAT, false, 0, 0);
      gl.uniform3f(gl.getUniformLocation(this.program, "uColor"), 0.2, 0.95, 0.35);
      gl.uniform1f(gl.getUniformLocation(this.program, "uFlat"), 1);
      gl.drawArrays(gl.POINTS, 0, this.nPoints);
    }
  }
}

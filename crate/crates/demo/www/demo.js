import init, { bessel_profile, three_lines_profile, holder_quotients } from "./pkg/parareg_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

// Draws each series [xs, ys, colour] on a shared box.
function plot(canvas, series, { logY = false } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const tf = logY ? (v) => Math.log10(Math.max(v, 1e-300)) : (v) => v;
  let [x0, x1, y0, y1] = [Infinity, -Infinity, Infinity, -Infinity];
  for (const [xs, ys] of series) {
    xs.forEach((x) => { x0 = Math.min(x0, x); x1 = Math.max(x1, x); });
    ys.forEach((y) => { y0 = Math.min(y0, tf(y)); y1 = Math.max(y1, tf(y)); });
  }
  if (y1 - y0 < 1e-12) { y0 -= 1; y1 += 1; }
  const px = (x) => 30 + ((x - x0) / (x1 - x0 || 1)) * (w - 40);
  const py = (y) => h - 20 - ((tf(y) - y0) / (y1 - y0)) * (h - 30);
  for (const [xs, ys, colour] of series) {
    ctx.strokeStyle = colour;
    ctx.beginPath();
    xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(ys[i])) : ctx.moveTo(px(x), py(ys[i]))));
    ctx.stroke();
  }
}

function bessel() {
  const n = 256;
  const v = bessel_profile(n, num("s-re"), num("s-im"));
  const xs = v.slice(0, n), f = v.slice(n, 2 * n), re = v.slice(2 * n, 3 * n), im = v.slice(3 * n);
  plot($("bessel-plot"), [[xs, f, "#999"], [xs, re, "#1f5fa8"], [xs, im, "#c0392b"]]);
  $("bessel-out").textContent = `s = ${num("s-re")} + ${num("s-im")}i: grey f, blue Re J^s f, red Im J^s f`;
}

function threeLines() {
  try {
    const v = three_lines_profile(num("theta"), num("q0"), num("q1"), Math.max(0, num("seed") | 0));
    const [hTheta, bound] = v;
    const a = [], m = [];
    for (let i = 2; i < v.length; i += 2) { a.push(v[i]); m.push(v[i + 1]); }
    const chord = a.map((x) => Math.pow(m[0], 1 - x) * Math.pow(m[m.length - 1], x));
    plot($("lines-plot"), [[a, m, "#1f5fa8"], [a, chord, "#999"]], { logY: true });
    const ok = hTheta <= bound * (1 + 1e-6);
    $("lines-out").textContent = `|H(θ)| = ${hTheta.toExponential(4)} ≤ M0^(1−θ) M1^θ = ${bound.toExponential(4)}: ${ok ? "PASS" : "FAIL"}`;
  } catch (e) {
    $("lines-out").textContent = String(e);
  }
}

function holder() {
  const n = 256;
  const v = holder_quotients(parseInt($("kind").value), n, num("alpha"));
  const [direct, lp] = v;
  const ts = Array.from({ length: n }, (_, i) => (2 * Math.PI * i) / n);
  plot($("holder-plot"), [[ts, v.slice(2), "#1f5fa8"]]);
  $("holder-out").textContent =
    `α = ${num("alpha")}: direct ${direct.toFixed(4)}, Littlewood-Paley ${lp.toFixed(4)}, ratio ${(direct / lp).toFixed(3)}`;
}

await init();
for (const id of ["s-re", "s-im"]) $(id).addEventListener("input", bessel);
for (const id of ["theta", "q0", "q1", "seed"]) $(id).addEventListener("change", threeLines);
for (const id of ["kind", "alpha"]) $(id).addEventListener("input", holder);
bessel();
threeLines();
holder();

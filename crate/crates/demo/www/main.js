import init, { pathPair, couplingWalk, gapBound } from "./pkg/disorder_demo.js";

const $ = (id) => document.getElementById(id);

// series: [{ points: [[x, y], ...], color, width }], marks: [[x, y, color]]
function plot(canvas, series, marks = []) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const all = series.flatMap((s) => s.points);
  let [x0, x1] = [Math.min(...all.map((p) => p[0])), Math.max(...all.map((p) => p[0]))];
  let [y0, y1] = [Math.min(...all.map((p) => p[1])), Math.max(...all.map((p) => p[1]))];
  if (y1 === y0) { y0 -= 1; y1 += 1; }
  if (x1 === x0) { x1 = x0 + 1; }
  const pad = 30;
  const sx = (x) => pad + ((x - x0) / (x1 - x0)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - y0) / (y1 - y0)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, sy(Math.max(y0, Math.min(y1, 0))));
  ctx.lineTo(w - pad, sy(Math.max(y0, Math.min(y1, 0))));
  ctx.stroke();
  ctx.fillStyle = "#555";
  ctx.fillText(y1.toPrecision(3), 2, pad - 4);
  ctx.fillText(y0.toPrecision(3), 2, h - pad + 12);
  ctx.fillText(String(x0), pad, h - 8);
  ctx.fillText(String(+x1.toPrecision(4)), w - pad - 30, h - 8);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = s.width ?? 1;
    ctx.beginPath();
    s.points.forEach(([x, y], i) => (i ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
    ctx.stroke();
  }
  for (const [x, y, color] of marks) {
    ctx.fillStyle = color;
    ctx.beginPath();
    ctx.arc(sx(x), sy(y), 4, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function guarded(out, f) {
  try {
    out.classList.remove("err");
    f();
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e);
  }
}

function runPathPair() {
  guarded($("pp-out"), () => {
    const r = JSON.parse(pathPair(+$("pp-n").value, $("pp-law").value, +$("pp-seed").value));
    plot($("pp-canvas"), [
      { points: r.particle, color: "#223" },
      { points: r.limit, color: "#e80", width: 1.5 },
    ]);
    $("pp-out").textContent =
      `N = ${r.n}   S_N = ${r.s_n.toFixed(5)}   W[N] = ${r.w.toFixed(5)}   K = ${r.k_stat.toFixed(4)}   ` +
      `jumps = ${(r.particle.length - 2) / 2}`;
  });
}

function runWalk() {
  guarded($("cw-out"), () => {
    const r = JSON.parse(couplingWalk(+$("cw-n").value, +$("cw-seed").value));
    // thin long walks to about 4000 points per curve
    const step = Math.max(1, Math.floor(r.n / 4000));
    const pick = (ys) => ys.map((y, i) => [i + 1, y]).filter((_, i) => i % step === 0 || i === ys.length - 1);
    const i = r.argmax;
    plot(
      $("cw-canvas"),
      [
        { points: pick(r.partial_sums), color: "#223" },
        { points: pick(r.brownian), color: "#e80" },
      ],
      [[i, r.partial_sums[i - 1], "#c00"], [i, r.brownian[i - 1], "#c00"]],
    );
    $("cw-out").textContent =
      `N = ${r.n}   K = ${r.k_stat.toFixed(4)} at n = ${i}   ` +
      `|sum U - beta_N| = ${Math.abs(r.partial_sums[r.n - 1] - r.brownian[r.n - 1]).toFixed(4)}`;
  });
}

function runGap() {
  guarded($("gb-out"), () => {
    const args = [$("gb-g").value, +$("gb-n").value, $("gb-law").value, +$("gb-seed").value];
    const lhs = [];
    const rhs = [];
    for (let k = 0; k <= 120; k++) {
      const x = -3 + (6 * k) / 120;
      const r = JSON.parse(gapBound(args[0], x, args[1], args[2], args[3]));
      lhs.push([x, r.lhs]);
      rhs.push([x, r.rhs]);
    }
    plot($("gb-canvas"), [
      { points: rhs, color: "#e80", width: 1.5 },
      { points: lhs, color: "#223" },
    ]);
    const at0 = JSON.parse(gapBound(args[0], 0, args[1], args[2], args[3]));
    const worst = Math.max(...lhs.map((p, k) => p[1] / rhs[k][1]));
    $("gb-out").textContent =
      `largest lhs/rhs over the grid = ${worst.toFixed(4)}   at x = 0: ` +
      `lhs = ${at0.lhs.toExponential(3)}, rhs = ${at0.rhs.toExponential(3)}, K = ${at0.k_stat.toFixed(4)}, ` +
      `coupling term = ${at0.coupling_term.toExponential(3)}`;
  });
}

await init();
$("pp-go").onclick = runPathPair;
$("cw-go").onclick = runWalk;
$("gb-go").onclick = runGap;
runPathPair();
runWalk();
runGap();

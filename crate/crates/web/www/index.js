import init, { presetJson, renderPoints, lauNgaiDimension, analyzeModel } from "./pkg/ftcdim_web.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f5fa8", "#c0392b", "#2e8b57", "#8e44ad"];

function call(f, ...args) {
  try {
    return { ok: JSON.parse(f(...args)) };
  } catch (e) {
    return { err: String(e) };
  }
}

function drawPoints(canvas, points, components) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (points.length === 0) return;
  // a hemisphere is drawn from above
  let lo = [Infinity, Infinity], hi = [-Infinity, -Infinity];
  for (const p of points) {
    for (const k of [0, 1]) { lo[k] = Math.min(lo[k], p[k]); hi[k] = Math.max(hi[k], p[k]); }
  }
  const span = Math.max(hi[0] - lo[0], hi[1] - lo[1]) || 1;
  const pad = 10, scale = (canvas.width - 2 * pad) / span;
  points.forEach((p, i) => {
    ctx.fillStyle = COLORS[components[i] % COLORS.length];
    ctx.fillRect(pad + (p[0] - lo[0]) * scale, canvas.height - pad - (p[1] - lo[1]) * scale, 1, 1);
  });
}

function updateRender() {
  const depth = Number($("render-depth").value);
  $("render-depth-label").textContent = (2 ** -depth).toPrecision(3);
  const r = call(renderPoints, $("render-preset").value, $("render-chart").value, 2 ** -depth);
  if (r.err) {
    $("render-info").innerHTML = `<span class="error">${r.err}</span>`;
    drawPoints($("render-canvas"), [], []);
    return;
  }
  $("render-info").textContent = `${r.ok.points.length} points, chart ${r.ok.chart}`;
  drawPoints($("render-canvas"), r.ok.points, r.ok.components);
}

function updateLauNgai() {
  const [b, m, n] = ["ln-base", "ln-m", "ln-n"].map((id) => Number($(id).value));
  $("ln-m-label").textContent = m;
  $("ln-n-label").textContent = n;
  const r = call(lauNgaiDimension, b, m, n);
  $("ln-out").textContent = r.err
    ? r.err
    : `rho = ${r.ok.rho}, r = ${r.ok.r}\ntypes: ${r.ok.types}\nalpha: ${r.ok.alpha.toFixed(15)}`;
}

function drawCurve(canvas, curve, alpha) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const pad = 30, w = canvas.width - 2 * pad, h = canvas.height - 2 * pad;
  const xmax = curve[curve.length - 1][0];
  const ymax = Math.max(...curve.map((p) => p[1]));
  const X = (x) => pad + (x / xmax) * w, Y = (y) => canvas.height - pad - (y / ymax) * h;
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(X(0), Y(1)); ctx.lineTo(X(xmax), Y(1));
  ctx.moveTo(X(alpha), Y(0)); ctx.lineTo(X(alpha), Y(ymax));
  ctx.stroke();
  ctx.strokeStyle = COLORS[0];
  ctx.beginPath();
  curve.forEach(([x, y], i) => (i ? ctx.lineTo(X(x), Y(y)) : ctx.moveTo(X(x), Y(y))));
  ctx.stroke();
  ctx.fillStyle = "#222";
  ctx.fillText("λ_α", 4, pad - 8);
  ctx.fillText(`α = ${alpha.toFixed(6)}`, X(alpha) + 4, pad);
  ctx.fillText("1", 4, Y(1) + 4);
}

function loadModel() {
  const r = presetJson($("model-preset").value);
  $("model-text").value = r;
}

function runModel() {
  const r = call(analyzeModel, $("model-text").value, 200);
  if (r.err) {
    $("model-out").innerHTML = `<span class="error">${r.err}</span>`;
    return;
  }
  $("model-out").textContent = r.ok.report;
  drawCurve($("curve-canvas"), r.ok.curve, r.ok.alpha);
}

await init();
$("status").textContent = "Ready.";
for (const id of ["render-preset", "render-chart", "render-depth"]) $(id).addEventListener("input", updateRender);
for (const id of ["ln-base", "ln-m", "ln-n"]) $(id).addEventListener("input", updateLauNgai);
$("model-preset").addEventListener("change", () => { loadModel(); runModel(); });
$("model-run").addEventListener("click", runModel);
updateRender();
updateLauNgai();
loadModel();
runModel();

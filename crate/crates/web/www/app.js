import init, { predict_curves, denoise_demo, dtransform_curve } from "./pkg/optshrink_web.js";

const COLORS = ["#1f6feb", "#d1242f", "#2da44e", "#8250df", "#bf8700"];

function formValues(form) {
  const out = {};
  for (const [k, v] of new FormData(form)) out[k] = Number(v);
  return out;
}

function call(fn, ...args) {
  try {
    return JSON.parse(fn(...args));
  } catch (e) {
    showError(String(e));
    return null;
  }
}

function showError(message) {
  const el = document.getElementById("status");
  el.className = "error";
  el.textContent = message;
}

function clearError() {
  document.getElementById("status").textContent = "";
}

function legend(id, names) {
  document.getElementById(id).innerHTML = names
    .map((n, i) => `<span><i style="background:${COLORS[i]}"></i>${n}</span>`)
    .join("");
}

// Line chart; `series` holds arrays aligned with `xs`, null entries break the line.
function plot(canvas, xs, series, { yMin, yMax, marks = [] } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = { l: 48, r: 12, t: 10, b: 26 };
  ctx.clearRect(0, 0, w, h);

  const finite = series.flat().filter((v) => v !== null && Number.isFinite(v));
  const lo = yMin ?? Math.min(0, ...finite);
  const hi = yMax ?? Math.max(...finite) * 1.05;
  const x0 = xs[0], x1 = xs[xs.length - 1];
  const px = (x) => pad.l + ((x - x0) / (x1 - x0)) * (w - pad.l - pad.r);
  const py = (y) => h - pad.b - ((y - lo) / (hi - lo)) * (h - pad.t - pad.b);

  ctx.strokeStyle = "#d6dbe1";
  ctx.fillStyle = "#4b5561";
  ctx.font = "11px system-ui";
  for (let k = 0; k <= 4; k++) {
    const y = lo + ((hi - lo) * k) / 4;
    ctx.beginPath();
    ctx.moveTo(pad.l, py(y));
    ctx.lineTo(w - pad.r, py(y));
    ctx.stroke();
    ctx.fillText(y.toFixed(2), 4, py(y) + 4);
  }
  for (let k = 0; k <= 5; k++) {
    const x = x0 + ((x1 - x0) * k) / 5;
    ctx.fillText(x.toFixed(2), px(x) - 10, h - 8);
  }
  for (const m of marks) {
    ctx.strokeStyle = "#8c959f";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(px(m), pad.t);
    ctx.lineTo(px(m), h - pad.b);
    ctx.stroke();
    ctx.setLineDash([]);
  }

  series.forEach((ys, i) => {
    ctx.strokeStyle = COLORS[i % COLORS.length];
    ctx.lineWidth = 2;
    ctx.beginPath();
    let pen = false;
    ys.forEach((y, k) => {
      if (y === null || !Number.isFinite(y) || y > hi * 2) {
        pen = false;
        return;
      }
      const yy = Math.max(lo, Math.min(hi, y));
      if (pen) ctx.lineTo(px(xs[k]), py(yy));
      else ctx.moveTo(px(xs[k]), py(yy));
      pen = true;
    });
    ctx.stroke();
  });
  ctx.lineWidth = 1;
}

function heatmap(canvas, { size, values }) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(size, size);
  values.forEach((v, k) => {
    const t = Math.max(-1, Math.min(1, v));
    // Diverging blue-white-red.
    const r = t > 0 ? 255 : Math.round(255 * (1 + t));
    const b = t < 0 ? 255 : Math.round(255 * (1 - t));
    const g = Math.round(255 * (1 - Math.abs(t)));
    img.data.set([r, g, b, 255], 4 * k);
  });
  const off = new OffscreenCanvas(size, size);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function fmt(x) {
  return x === undefined || x === null ? "–" : x.toFixed(4);
}

function runCurves() {
  const { c, p, thetaMax } = formValues(document.getElementById("curves-form"));
  const r = call(predict_curves, c, p, thetaMax, 400);
  if (!r) return;
  clearError();
  legend("curves-legend", ["optimal weight", "truncated SVD weight", "optimal NSE", "truncated SVD NSE"]);
  plot(document.getElementById("curves"), r.theta, [r.wOpt, r.wEym, r.nseOpt, r.nseEym], {
    yMin: 0,
    yMax: Math.max(thetaMax * 1.1, 2),
    marks: [r.criticalTheta],
  });
  document.getElementById("curves-note").textContent =
    `Phase transition at θ = ${r.criticalTheta.toFixed(4)}; noise bulk edge b = ${r.edge.toFixed(4)}. ` +
    "Below the transition the optimal weight is 0.";
}

function runDenoise() {
  const { n, m, theta, p, rank, seed } = formValues(document.getElementById("denoise-form"));
  const r = call(denoise_demo, n, m, theta, p, rank, seed);
  if (!r) return;
  clearError();
  heatmap(document.getElementById("thumb-signal"), r.signal);
  heatmap(document.getElementById("thumb-observed"), r.observed);
  heatmap(document.getElementById("thumb-denoised"), r.denoised);

  const rows = r.optshrinkWeights
    .map(
      (w, i) =>
        `<tr><td>${i + 1}</td><td>${fmt(r.singularValues[i])}</td><td>${fmt(w)}${r.poleFlags[i] ? " ⚠" : ""}</td>` +
        `<td>${fmt(r.oracleWeights[i])}</td></tr>`,
    )
    .join("");
  document.getElementById("denoise-table").innerHTML =
    `<table><tr><th>i</th><th>σ̂ᵢ</th><th>OptShrink ŵᵢ</th><th>oracle wᵢ</th></tr>${rows}</table>` +
    `<table style="margin-top:0.8rem"><tr><th>normalized error</th><th></th></tr>` +
    `<tr><td>OptShrink</td><td>${fmt(r.nseOptshrink)}</td></tr>` +
    `<tr><td>OptShrink self-estimate</td><td>${fmt(r.relMseEstimate)}</td></tr>` +
    `<tr><td>truncated SVD</td><td>${fmt(r.nseEym)}</td></tr>` +
    `<tr><td>oracle</td><td>${fmt(r.nseOracle)}</td></tr></table>`;

  const idx = r.singularValues.map((_, i) => i + 1);
  plot(document.getElementById("spectrum"), idx, [r.singularValues], { yMin: 0 });
}

function runDTransform() {
  const { n, m, zMin, zMax, seed } = formValues(document.getElementById("dtransform-form"));
  const r = call(dtransform_curve, n, m, seed, zMin, zMax, 300);
  if (!r) return;
  clearError();
  legend("dtransform-legend", ["empirical D̂(z)", "Marčenko–Pastur D(z)"]);
  const finite = [...r.empirical, ...r.marchenkoPastur].filter((v) => v !== null);
  plot(document.getElementById("dtransform"), r.z, [r.empirical, r.marchenkoPastur], {
    yMin: 0,
    yMax: Math.min(Math.max(...finite), 4 * finite[finite.length - 1] + 1),
    marks: [r.edge, r.largestSingularValue],
  });
}

function bind(id, fn) {
  document.getElementById(id).addEventListener("submit", (e) => {
    e.preventDefault();
    fn();
  });
}

await init();
bind("curves-form", runCurves);
bind("denoise-form", runDenoise);
bind("dtransform-form", runDTransform);
runCurves();
runDenoise();
runDTransform();

import init, { Playground, contrastive_loss_profile } from "../pkg/gut_wasm_demo.js";

const $ = (id) => document.getElementById(id);
let playground = null;

function purity() {
  return document.querySelector("input[name=purity]:checked").value;
}

function color(label) {
  return `hsl(${(label * 137.508) % 360}, 65%, 48%)`;
}

function axes(ctx, w, h, pad) {
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
}

function line(ctx, xs, ys, sx, sy, stroke) {
  ctx.strokeStyle = stroke;
  ctx.lineWidth = 2;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(ys[i])) : ctx.moveTo(sx(x), sy(ys[i]))));
  ctx.stroke();
  ctx.lineWidth = 1;
}

function drawPoints(labels) {
  const canvas = $("points");
  const ctx = canvas.getContext("2d");
  const xy = playground.points();
  let r = 0;
  for (const v of xy) r = Math.max(r, Math.abs(v));
  const half = canvas.width / 2;
  const scale = (half - 12) / (r || 1);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  for (let i = 0; i < labels.length; i++) {
    ctx.fillStyle = color(labels[i]);
    ctx.beginPath();
    ctx.arc(half + xy[2 * i] * scale, half - xy[2 * i + 1] * scale, 4, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function drawCurves(rows, alpha) {
  const canvas = $("curves");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  ctx.clearRect(0, 0, w, h);
  axes(ctx, w, h, pad);
  const sx = (a) => pad + a * (w - 2 * pad);
  const sy = (v) => h - pad - v * (h - 2 * pad);
  const alphas = [], pars = [], purs = [];
  for (let i = 0; i < rows.length; i += 5) {
    alphas.push(rows[i]);
    pars.push(rows[i + 2]);
    purs.push(rows[i + 3]);
  }
  line(ctx, alphas, pars, sx, sy, "#1f77b4");
  line(ctx, alphas, purs, sx, sy, "#d62728");
  ctx.strokeStyle = "#333";
  ctx.setLineDash([4, 4]);
  ctx.beginPath();
  ctx.moveTo(sx(alpha), pad);
  ctx.lineTo(sx(alpha), h - pad);
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.fillStyle = "#1f77b4";
  ctx.fillText("parsimony", w - 110, pad);
  ctx.fillStyle = "#d62728";
  ctx.fillText(`${purity()} purity`, w - 110, pad + 14);
  ctx.fillStyle = "#333";
  ctx.fillText("alpha", w / 2, h - 8);
}

function drawLoss(margin) {
  const canvas = $("loss");
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 30;
  const rows = contrastive_loss_profile(margin, 201);
  const cos = [], pos = [], neg = [];
  for (let i = 0; i < rows.length; i += 3) {
    cos.push(rows[i]);
    pos.push(rows[i + 1]);
    neg.push(rows[i + 2]);
  }
  ctx.clearRect(0, 0, w, h);
  axes(ctx, w, h, pad);
  const sx = (c) => pad + ((c + 1) / 2) * (w - 2 * pad);
  const sy = (v) => h - pad - (v / 2) * (h - 2 * pad);
  line(ctx, cos, pos, sx, sy, "#2ca02c");
  line(ctx, cos, neg, sx, sy, "#9467bd");
  ctx.fillStyle = "#2ca02c";
  ctx.fillText("similar pair", w - 120, pad);
  ctx.fillStyle = "#9467bd";
  ctx.fillText("dissimilar pair", w - 120, pad + 14);
  ctx.fillStyle = "#333";
  ctx.fillText("cosine", w / 2, h - 8);
}

function update() {
  if (!playground) return;
  const alpha = Number($("alpha").value);
  $("alpha-out").textContent = alpha.toFixed(2);
  const kind = purity();
  const i = playground.select(alpha, kind);
  const l = playground.losses(i);
  $("selected").textContent =
    `${playground.summary(i)}: k = ${playground.k(i)}, parsimony ${l[0].toFixed(3)}, ` +
    `construct purity ${l[1].toFixed(3)}, relation purity ${l[2].toFixed(3)}`;
  drawPoints(playground.labels(i));
  drawCurves(playground.sweep(kind), alpha);
}

function regenerate() {
  $("error").textContent = "";
  $("status").textContent = "clustering...";
  setTimeout(() => {
    try {
      const next = new Playground(
        Number($("n").value),
        Number($("clusters").value),
        Number($("noise").value),
        BigInt($("seed").value),
      );
      if (playground) playground.free();
      playground = next;
      $("status").textContent = `${playground.candidate_count()} distinct candidates`;
      update();
    } catch (e) {
      $("status").textContent = "";
      $("error").textContent = String(e.message ?? e);
    }
  }, 0);
}

await init();
$("generate").addEventListener("click", regenerate);
$("alpha").addEventListener("input", update);
document.querySelectorAll("input[name=purity]").forEach((el) => el.addEventListener("change", update));
$("margin").addEventListener("input", () => {
  const m = Number($("margin").value);
  $("margin-out").textContent = m.toFixed(2);
  drawLoss(m);
});
drawLoss(Number($("margin").value));
regenerate();

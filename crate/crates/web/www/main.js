import init, { threshold_trace, registration_demo, libev_image } from "./pkg/roadloc_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function plotSeries(canvas, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.fillStyle = "#111";
  ctx.fillRect(0, 0, w, h);
  const all = series.flatMap((s) => s.values);
  const lo = Math.min(...all), hi = Math.max(...all);
  const n = Math.max(...series.map((s) => s.values.length));
  const sx = (i) => 10 + (i / Math.max(n - 1, 1)) * (w - 20);
  const sy = (v) => h - 10 - ((v - lo) / (hi - lo || 1)) * (h - 20);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.values.forEach((v, i) => (i ? ctx.lineTo(sx(i), sy(v)) : ctx.moveTo(sx(i), sy(v))));
    ctx.stroke();
  }
  ctx.fillStyle = "#ddd";
  ctx.fillText(`${lo.toFixed(1)} .. ${hi.toFixed(1)}`, 12, 14);
}

function runThreshold() {
  try {
    const t = JSON.parse(threshold_trace(BigInt(num("th-seed")), num("th-frames"), num("th-q"), num("th-r"), num("th-frac")));
    plotSeries($("th-canvas"), [
      { values: t.measurement, color: "#888" },
      { values: t.rho, color: "#fc4" },
    ]);
    $("th-out").textContent = `final threshold ${t.rho[t.rho.length - 1].toFixed(2)} (grey: per-frame mean + 2 sd, yellow: filtered)`;
  } catch (e) {
    $("th-out").textContent = String(e);
  }
}

function runRegistration() {
  try {
    const r = JSON.parse(
      registration_demo($("rg-solver").value, num("rg-eps"), num("rg-dx"), num("rg-dy"), num("rg-dyaw"), BigInt(num("rg-seed"))),
    );
    const canvas = $("rg-canvas");
    const ctx = canvas.getContext("2d");
    const { width: w, height: h } = canvas;
    ctx.fillStyle = "#111";
    ctx.fillRect(0, 0, w, h);
    const scale = 20;
    const px = ([x, y]) => [w / 2 + x * scale, h / 2 - (y - 1.75) * scale];
    const dots = (pts, color) => {
      ctx.fillStyle = color;
      for (const p of pts) {
        const [u, v] = px(p);
        ctx.fillRect(u - 1, v - 1, 2, 2);
      }
    };
    dots(r.map, "#5af");
    dots(r.observed, "#f84");
    const e = r.estimate;
    $("rg-out").textContent =
      `estimate x ${e[0].toFixed(4)} m, y ${e[1].toFixed(4)} m, yaw ${e[2].toFixed(4)} deg` +
      ` after ${r.iterations} iterations (${r.termination}); truth is the origin`;
  } catch (e) {
    $("rg-out").textContent = String(e);
  }
}

function runLibev() {
  $("lb-out").textContent = "simulating...";
  setTimeout(() => {
    try {
      const img = libev_image(num("lb-frames"), BigInt(num("lb-seed")), $("lb-wet").checked);
      const canvas = $("lb-canvas");
      canvas.width = img.width;
      canvas.height = img.height;
      const data = new ImageData(new Uint8ClampedArray(img.rgba()), img.width, img.height);
      canvas.getContext("2d").putImageData(data, 0, 0);
      $("lb-out").textContent = `${img.width}x${img.height}, ${img.instances} labelled instances`;
      img.free();
    } catch (e) {
      $("lb-out").textContent = String(e);
    }
  }, 0);
}

await init();
$("th-run").onclick = runThreshold;
$("rg-run").onclick = runRegistration;
$("lb-run").onclick = runLibev;
runThreshold();
runRegistration();

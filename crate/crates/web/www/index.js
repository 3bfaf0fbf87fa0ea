// Built module from `wasm-bindgen --target web --out-dir www/pkg`.
import init, { exploreRp, compositePreview, propagatePreview } from "./pkg/detkit_web.js";

const $ = (id) => document.getElementById(id);

const SAMPLE_GT = `image_id,class,x_min,y_min,x_max,y_max
img0,bear,10,10,60,60
img0,deer,80,10,130,60
img1,deer,20,20,70,80
img1,moose,100,30,180,110
img2,bear,5,5,55,50`;

const SAMPLE_DET = `image_id,class,x_min,y_min,x_max,y_max,confidence
img0,bear,12,11,61,58,0.92
img0,moose,80,12,128,61,0.85
img1,deer,22,18,70,79,0.77
img1,moose,105,28,178,112,0.64
img2,bear,60,60,90,90,0.41
img2,deer,6,6,54,50,0.33`;

function drawCurves(ev) {
  const c = $("rp-plot");
  const g = c.getContext("2d");
  const pad = 30, w = c.width - 2 * pad, h = c.height - 2 * pad;
  g.clearRect(0, 0, c.width, c.height);
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, w, h);
  g.fillStyle = "#444";
  g.fillText("threshold", pad + w / 2 - 20, c.height - 8);
  const line = (ts, vs, color, dash) => {
    g.strokeStyle = color;
    g.setLineDash(dash);
    g.beginPath();
    ts.forEach((t, i) => {
      const x = pad + (1 - t) * w, y = pad + (1 - vs[i]) * h;
      i ? g.lineTo(x, y) : g.moveTo(x, y);
    });
    g.stroke();
  };
  const m = ev.mean_curve, a = ev.agnostic_curve;
  line(m.thresholds, m.recall, "#1f77b4", []);
  line(m.thresholds, m.precision, "#1f77b4", [4, 3]);
  line(a.thresholds, a.recall, "#d62728", []);
  line(a.thresholds, a.precision, "#d62728", [4, 3]);
  g.setLineDash([]);
  for (const [p, color] of [[ev.report.mrp, "#1f77b4"], [ev.report.crp, "#d62728"]]) {
    g.fillStyle = color;
    g.beginPath();
    g.arc(pad + (1 - p.threshold) * w, pad + (1 - p.value) * h, 4, 0, 2 * Math.PI);
    g.fill();
  }
  g.fillStyle = "#1f77b4";
  g.fillText("class mean (mRP)", pad + 5, pad + 12);
  g.fillStyle = "#d62728";
  g.fillText("class-agnostic (cRP)", pad + 5, pad + 24);
}

function runRp() {
  try {
    const ev = JSON.parse(exploreRp($("gt").value, $("det").value, Number($("iou").value)));
    const r = ev.report;
    const rows = Object.entries(r.classes).map(([c, m]) => `${c.padEnd(10)} AP ${m.ap.toFixed(3)}  RP ${m.rp.value.toFixed(3)}`);
    const fmt = (p) => `${p.value.toFixed(4)} at ${p.threshold.toFixed(3)}${p.no_crossing ? " (no crossing)" : ""}`;
    $("rp-out").textContent = [...rows, "", `mAP ${r.map.toFixed(4)}`, `mRP ${fmt(r.mrp)}`, `cRP ${fmt(r.crp)}`].join("\n");
    drawCurves(ev);
  } catch (e) {
    $("rp-out").textContent = String(e.message ?? e);
  }
}

function paint(canvas, rgba) {
  const img = new ImageData(new Uint8ClampedArray(rgba), canvas.width, canvas.height);
  canvas.getContext("2d").putImageData(img, 0, 0);
}

function runComposite() {
  const c = $("comp-canvas");
  try {
    paint(c, compositePreview(c.width, c.height, Number($("cx").value), Number($("cy").value), Number($("scale").value), Number($("sigma").value)));
    $("comp-err").textContent = "";
  } catch (e) {
    $("comp-err").textContent = String(e.message ?? e);
  }
}

function runPropagate() {
  const c = $("prop-canvas");
  try {
    const p = $("prev-box").value.split(",").map(Number);
    const q = $("cur-box").value.split(",").map(Number);
    if (p.length !== 4 || q.length !== 4) throw new Error("boxes are x_min,y_min,x_max,y_max");
    paint(c, propagatePreview(c.width, c.height, ...p, ...q));
    $("prop-err").textContent = "";
  } catch (e) {
    $("prop-err").textContent = String(e.message ?? e);
  }
}

await init();
$("gt").value = SAMPLE_GT;
$("det").value = SAMPLE_DET;
$("run-rp").addEventListener("click", runRp);
for (const id of ["cx", "cy", "scale", "sigma"]) $(id).addEventListener("input", runComposite);
$("run-prop").addEventListener("click", runPropagate);
runRp();
runComposite();
runPropagate();

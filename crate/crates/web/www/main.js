// Built with: wasm-bindgen --target web --out-dir www/pkg <carplan_web.wasm>
import init, { Demo, reeds_shepp } from "./pkg/carplan_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function color(i) {
  return `hsl(${(i * 137.507764) % 360},70%,45%)`;
}

// Map-to-canvas transform with y pointing up.
function view(canvas, w, h) {
  const s = Math.min(canvas.width / w, canvas.height / h);
  return {
    s,
    x: (x) => x * s,
    y: (y) => canvas.height - y * s,
    inv: (px, py) => [px / s, (canvas.height - py) / s],
  };
}

function poly(ctx, v, pts, stroke, fill) {
  ctx.beginPath();
  pts.forEach(([x, y], i) => (i ? ctx.lineTo(v.x(x), v.y(y)) : ctx.moveTo(v.x(x), v.y(y))));
  ctx.closePath();
  if (fill) { ctx.fillStyle = fill; ctx.fill(); }
  if (stroke) { ctx.strokeStyle = stroke; ctx.stroke(); }
}

function line(ctx, v, pts, stroke, width = 1.5) {
  ctx.beginPath();
  pts.forEach(([x, y], i) => (i ? ctx.lineTo(v.x(x), v.y(y)) : ctx.moveTo(v.x(x), v.y(y))));
  ctx.strokeStyle = stroke;
  ctx.lineWidth = width;
  ctx.stroke();
  ctx.lineWidth = 1;
}

let demo = null, scene = null, frame = null, timer = null, plan = null, click = null;

function drawScene() {
  const c = $("scene"), ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  if (!scene) return;
  const v = view(c, scene.width, scene.height);
  ctx.strokeStyle = "#000";
  ctx.strokeRect(0, c.height - scene.height * v.s, scene.width * v.s, scene.height * v.s);
  ctx.fillStyle = "#555";
  for (const [x, y, r] of scene.obstacles) {
    ctx.beginPath();
    ctx.arc(v.x(x), v.y(y), r * v.s, 0, 2 * Math.PI);
    ctx.fill();
  }
  ctx.setLineDash([4, 3]);
  scene.goals.forEach((g, i) => poly(ctx, v, g, color(i)));
  ctx.setLineDash([]);
  if (frame) {
    frame.robots.forEach((r, i) => poly(ctx, v, r.corners, "#000", color(i)));
  }
  if (plan && plan.found) line(ctx, v, plan.points, "#d00", 2);
  if (click) {
    ctx.fillStyle = "#d00";
    ctx.fillRect(v.x(click[0]) - 3, v.y(click[1]) - 3, 6, 6);
  }
}

function status(text) {
  $("status").textContent = text;
}

function generate() {
  stop();
  try {
    demo = new Demo(num("w"), num("h"), num("obs"), num("n"), num("seed"), $("variant").value);
  } catch (e) {
    demo = null; scene = null; frame = null;
    status(String(e.message || e));
    drawScene();
    return;
  }
  scene = JSON.parse(demo.scene());
  frame = JSON.parse(demo.step(0));
  plan = null; click = null;
  $("play").disabled = $("step").disabled = false;
  status(`t=0, ${frame.robots.length} robots`);
  drawScene();
}

function advance() {
  frame = JSON.parse(demo.step(1));
  const home = frame.robots.filter((r) => r.at_goal).length;
  status(`t=${frame.time}, ${home}/${frame.robots.length} at goal`);
  drawScene();
  if (frame.done) stop();
}

function stop() {
  if (timer) clearInterval(timer);
  timer = null;
  $("play").textContent = "Play";
}

$("gen").onclick = generate;
$("step").onclick = () => demo && advance();
$("play").onclick = () => {
  if (timer) return stop();
  timer = setInterval(advance, 80);
  $("play").textContent = "Pause";
};

$("scene").onclick = (ev) => {
  if (!demo) return;
  const v = view($("scene"), scene.width, scene.height);
  const p = v.inv(ev.offsetX, ev.offsetY);
  if (!click) {
    click = p; plan = null;
    drawScene();
    return;
  }
  try {
    plan = JSON.parse(demo.plan(click[0], click[1], 0, p[0], p[1], 0));
    status(plan.found
      ? `planned ${plan.primitives.length} steps, length ${plan.length.toFixed(2)}, ${plan.expansions} expansions`
      : `no path after ${plan.expansions} expansions`);
  } catch (e) {
    plan = null;
    status(String(e.message || e));
  }
  click = null;
  drawScene();
};

function drawRs() {
  const c = $("rs"), ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  // Centre the origin in a 20x20 window.
  const s = c.width / 20, X = (x) => (x + 10) * s, Y = (y) => c.height - (y + 10) * s;
  ctx.strokeStyle = "#ddd";
  for (let k = -10; k <= 10; k += 2) {
    ctx.beginPath(); ctx.moveTo(X(k), 0); ctx.lineTo(X(k), c.height); ctx.stroke();
    ctx.beginPath(); ctx.moveTo(0, Y(k)); ctx.lineTo(c.width, Y(k)); ctx.stroke();
  }
  const arrow = (x, y, t, col) => {
    ctx.strokeStyle = col; ctx.lineWidth = 2;
    ctx.beginPath(); ctx.moveTo(X(x), Y(y));
    ctx.lineTo(X(x + Math.cos(t)), Y(y + Math.sin(t))); ctx.stroke();
    ctx.lineWidth = 1;
  };
  let p;
  try {
    p = JSON.parse(reeds_shepp(0, 0, 0, num("gx"), num("gy"), num("gt"), num("rr")));
  } catch (e) {
    $("rsinfo").textContent = String(e.message || e);
    return;
  }
  ctx.beginPath();
  p.points.forEach(([x, y], i) => (i ? ctx.lineTo(X(x), Y(y)) : ctx.moveTo(X(x), Y(y))));
  ctx.strokeStyle = "#06c"; ctx.lineWidth = 2; ctx.stroke(); ctx.lineWidth = 1;
  arrow(0, 0, 0, "#080");
  arrow(num("gx"), num("gy"), num("gt") * Math.PI / 180, "#d00");
  $("rsinfo").textContent = `${p.word}  length ${p.length.toFixed(3)}  cusps ${p.cusps}`;
}

$("rs").onclick = (ev) => {
  const c = $("rs"), s = c.width / 20;
  $("gx").value = (ev.offsetX / s - 10).toFixed(1);
  $("gy").value = ((c.height - ev.offsetY) / s - 10).toFixed(1);
  drawRs();
};
for (const id of ["gx", "gy", "gt", "rr"]) $(id).oninput = drawRs;

await init();
drawRs();
generate();

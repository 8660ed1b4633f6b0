import init, { simulate, train } from "./pkg/gastridge_web.js";

const $ = (id) => document.getElementById(id);

function plot(canvas, t, series, colors) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 40;
  ctx.clearRect(0, 0, w, h);
  let lo = Infinity, hi = -Infinity;
  for (const s of series) for (const v of s) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  if (hi === lo) { hi += 1e-3; lo -= 1e-3; }
  const x = (v) => pad + ((v - t[0]) / (t[t.length - 1] - t[0])) * (w - 2 * pad);
  const y = (v) => h - pad / 2 - ((v - lo) / (hi - lo)) * (h - pad);
  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.strokeRect(pad, pad / 2, w - 2 * pad, h - pad);
  ctx.fillText(hi.toPrecision(4), 2, pad / 2 + 10);
  ctx.fillText(lo.toPrecision(4), 2, h - pad / 2);
  ctx.fillText(`${t[t.length - 1]} s`, w - pad - 30, h - 4);
  series.forEach((s, i) => {
    ctx.strokeStyle = colors[i];
    ctx.beginPath();
    s.forEach((v, k) => (k ? ctx.lineTo(x(t[k]), y(v)) : ctx.moveTo(x(t[k]), y(v))));
    ctx.stroke();
  });
}

function runSimulate() {
  const req = {
    profile: $("profile").value,
    c_rate: +$("c_rate").value,
    seed: +$("sim_seed").value,
    diffusion: +$("diffusion").value,
    reaction_rate: +$("reaction_rate").value,
    conductivity: +$("conductivity").value,
  };
  try {
    const r = JSON.parse(simulate(JSON.stringify(req)));
    plot($("sim_plot"), r.t, [r.v_base, r.v_scaled], ["#1f77b4", "#d62728"]);
    $("status").textContent = "";
  } catch (e) {
    $("status").textContent = String(e);
  }
}

function terms(list) {
  return list.map((t) => `${t.coefficient.toPrecision(6)}&middot;${t.label}`).join(" + ") || "(none)";
}

function runTrain() {
  const req = {
    planted: [+$("pa").value, +$("pb").value, +$("pc").value],
    noise_std: +$("noise").value,
    seed: +$("train_seed").value,
  };
  $("train_summary").textContent = "searching...";
  setTimeout(() => {
    try {
      const r = JSON.parse(train(JSON.stringify(req)));
      plot($("err_plot"), r.t, [r.e_r, r.e_hat], ["#1f77b4", "#d62728"]);
      const rho = r.pearson_rho === null ? "n/a" : r.pearson_rho.toFixed(4);
      $("train_summary").innerHTML =
        `<p>planted: ${terms(r.planted)}<br>recovered: ${terms(r.recovered)}<br>` +
        `held-out RMSE: model ${r.rmse_lfm.toExponential(3)} V, hybrid ${r.rmse_hybrid.toExponential(3)} V, ` +
        `&rho; = ${rho}; ${r.best_fitness.length - 1} generations</p>`;
      const rows = r.ranking
        .map((f, i) => `<tr><td>${i + 1}</td><td>${f.label}</td><td>${f.xbar.toExponential(3)}</td><td>${f.cumulative_info.toFixed(4)}</td></tr>`)
        .join("");
      $("ranking").innerHTML =
        `<table><tr><th>rank</th><th>term</th><th>x&#772;</th><th>cumulative</th></tr>${rows}</table>`;
      $("status").textContent = "";
    } catch (e) {
      $("train_summary").textContent = "";
      $("status").textContent = String(e);
    }
  }, 10);
}

await init();
for (const el of document.querySelectorAll("input[type=range]")) {
  const out = document.querySelector(`output[for=${el.id}]`);
  const show = () => (out.textContent = el.value);
  show();
  el.addEventListener("input", () => { show(); runSimulate(); });
}
for (const id of ["profile", "sim_seed"]) $(id).addEventListener("change", runSimulate);
$("train").addEventListener("click", runTrain);
runSimulate();

// Glue between the static page and the wasm module. Build the module with
//   wasm-pack build crates/wasm --target web --out-dir www/pkg
// then serve crates/wasm/www with any static file server.

import init, { explore_demo, fit_csv, predict_csv } from "./pkg/dmd_wasm.js";

const $ = (id) => document.getElementById(id);

function parseList(text) {
  return text.split(",").map((s) => parseFloat(s.trim())).filter((v) => !Number.isNaN(v));
}

function parseMatrix(text) {
  return text.split(";").map((row) => parseList(row));
}

function eigenTable(eigenvalues) {
  const rows = eigenvalues
    .map(
      (e, i) =>
        `<tr><td>${i}</td><td>${e.re.toPrecision(8)}</td><td>${e.im.toPrecision(8)}</td>` +
        `<td>${e.magnitude.toPrecision(8)}</td>` +
        `<td>${e.omega_re === null ? "-" : e.omega_re.toPrecision(6)}</td>` +
        `<td>${e.omega_im === null ? "-" : e.omega_im.toPrecision(6)}</td></tr>`
    )
    .join("");
  return (
    "<table><tr><th>i</th><th>re</th><th>im</th><th>|lambda|</th>" +
    "<th>omega re</th><th>omega im</th></tr>" +
    rows +
    "</table>"
  );
}

function renderFit(target, resultJson) {
  const r = JSON.parse(resultJson);
  const warnings = r.warnings.map((w) => `<div class="warn">⚠ ${w}</div>`).join("");
  target.innerHTML = `
    <div class="summary">
      fitted <b>${r.kind}</b> model — n = ${r.n}, rank = ${r.rank},
      delta_k = ${r.delta_k}, stability: <b>${r.stability}</b>,
      fit residual ${r.fit_residual.toExponential(2)}
    </div>
    ${warnings}
    <div class="row">
      <div class="card">${r.chart_svg}</div>
      <div class="card">${r.spectrum_svg}</div>
    </div>
    <div class="row"><div class="card">${eigenTable(r.eigenvalues)}</div></div>
    <details><summary>model file (paste into the Predict tab or save as .json)</summary>
      <pre class="out">${r.model_json.replace(/&/g, "&amp;").replace(/</g, "&lt;")}</pre>
    </details>`;
}

function showError(target, err) {
  target.innerHTML = `<p class="error">${String(err)}</p>`;
}

function wireTabs() {
  document.querySelectorAll(".tabs button").forEach((btn) => {
    btn.addEventListener("click", () => {
      document.querySelectorAll(".tabs button").forEach((b) => b.classList.remove("active"));
      document.querySelectorAll("section.panel").forEach((p) => p.classList.remove("visible"));
      btn.classList.add("active");
      $(`panel-${btn.dataset.tab}`).classList.add("visible");
    });
  });
}

function wireFamilySelector() {
  const show = {
    linear: ["f-eigs"],
    continuous: ["f-matrix"],
    randomwalk: ["f-sigma", "f-seed"],
    slowmanifold: ["f-lambda", "f-mu"],
  };
  const all = ["f-eigs", "f-matrix", "f-sigma", "f-seed", "f-lambda", "f-mu"];
  $("ex-family").addEventListener("change", () => {
    const fam = $("ex-family").value;
    all.forEach((id) => ($(id).hidden = !show[fam].includes(id)));
    if (fam === "slowmanifold") $("ex-dict").value = "monomials:1,0;0,1;2,0";
    if (fam === "randomwalk") { $("ex-x0").value = "1"; $("ex-steps").value = "150"; }
  });
}

async function main() {
  await init();
  wireTabs();
  wireFamilySelector();

  $("ex-run").addEventListener("click", () => {
    const fam = $("ex-family").value;
    const req = {
      family: fam,
      steps: parseInt($("ex-steps").value, 10),
      delta_k: parseFloat($("ex-dk").value),
      x0: parseList($("ex-x0").value),
      rank: $("ex-rank").value.trim(),
      modes: $("ex-modes").value,
      dict: $("ex-dict").value.trim(),
      horizon: parseFloat($("ex-horizon").value),
    };
    if (fam === "linear") req.eigs = parseList($("ex-eigs").value);
    if (fam === "continuous") req.matrix = parseMatrix($("ex-matrix").value);
    if (fam === "randomwalk") {
      req.sigma = parseFloat($("ex-sigma").value);
      req.seed = parseInt($("ex-seed").value, 10);
    }
    if (fam === "slowmanifold") {
      req.lambda = parseFloat($("ex-lambda").value);
      req.mu = parseFloat($("ex-mu").value);
    }
    try {
      renderFit($("ex-output"), explore_demo(JSON.stringify(req)));
    } catch (e) {
      showError($("ex-output"), e);
    }
  });

  $("csv-run").addEventListener("click", () => {
    const req = {
      csv: $("csv-text").value,
      rank: $("csv-rank").value.trim(),
      modes: $("csv-modes").value,
      dict: $("csv-dict").value.trim(),
    };
    const select = $("csv-select").value.trim();
    if (select) req.select_indices = parseList(select);
    try {
      renderFit($("csv-output"), fit_csv(JSON.stringify(req)));
    } catch (e) {
      showError($("csv-output"), e);
    }
  });

  $("pr-run").addEventListener("click", () => {
    const req = {
      model_json: $("pr-model").value,
      indices: parseList($("pr-at").value),
      continuous: $("pr-mode").value === "continuous",
    };
    try {
      const csv = predict_csv(JSON.stringify(req));
      $("pr-output").innerHTML = `<pre class="out">${csv}</pre>`;
    } catch (e) {
      showError($("pr-output"), e);
    }
  });
}

main();

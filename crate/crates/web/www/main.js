// Expects the wasm-bindgen output (`--target web`) in ./pkg.
import init, { filter_names, render_scene, apply_filters, compare } from "./pkg/retouch_web.js";

const SIZE = 128;
const SEED = 7;

const $ = (id) => document.getElementById(id);
const ctx = (id) => $(id).getContext("2d");

let source = null;    // RGBA bytes of the image being edited
let reference = null; // RGBA bytes it is scored against, if any
const params = new Float64Array(12);

function draw(id, rgba) {
  const img = new ImageData(new Uint8ClampedArray(rgba), SIZE, SIZE);
  ctx(id).putImageData(img, 0, 0);
}

function update() {
  const out = apply_filters(source, SIZE, SIZE, params);
  draw("output", out);
  if (reference) {
    const [p, s] = compare(out, reference, SIZE, SIZE);
    const [p0, s0] = compare(source, reference, SIZE, SIZE);
    $("metrics").textContent =
      `PSNR ${p.toFixed(2)} dB (input ${p0.toFixed(2)}), SSIM ${s.toFixed(4)} (input ${s0.toFixed(4)})`;
  } else {
    $("metrics").textContent = "no reference for uploaded images";
  }
}

function loadScene() {
  const index = Math.max(0, Number($("scene").value) | 0);
  source = render_scene(SEED, index, SIZE, true);
  reference = render_scene(SEED, index, SIZE, false);
  draw("input", source);
  draw("reference", reference);
  update();
}

function buildSliders() {
  const box = $("sliders");
  filter_names().forEach((name, k) => {
    const label = document.createElement("label");
    label.textContent = name;
    const input = document.createElement("input");
    Object.assign(input, { type: "range", min: -1, max: 1, step: 1 / 16, value: 0 });
    const value = document.createElement("span");
    value.textContent = "0.00";
    input.addEventListener("input", () => {
      params[k] = Number(input.value);
      value.textContent = params[k].toFixed(2);
      update();
    });
    box.append(label, input, value);
  });
}

function resetSliders() {
  params.fill(0);
  for (const input of $("sliders").querySelectorAll("input")) input.value = 0;
  for (const span of $("sliders").querySelectorAll("span")) span.textContent = "0.00";
  update();
}

async function loadUpload(file) {
  const bitmap = await createImageBitmap(file);
  const c = ctx("input");
  c.clearRect(0, 0, SIZE, SIZE);
  c.drawImage(bitmap, 0, 0, SIZE, SIZE);
  source = new Uint8Array(c.getImageData(0, 0, SIZE, SIZE).data.buffer);
  reference = null;
  ctx("reference").clearRect(0, 0, SIZE, SIZE);
  update();
}

await init();
buildSliders();
$("scene").addEventListener("change", loadScene);
$("reset").addEventListener("click", resetSliders);
$("upload").addEventListener("change", (e) => e.target.files[0] && loadUpload(e.target.files[0]));
loadScene();

import init, { adjustStack, predictPair, schedulePairs } from "./pkg/synpa_wasm_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);
const variant = () => $("variant").value;

function show(out, f) {
  out.classList.remove("error");
  try {
    const value = JSON.parse(f());
    out.textContent = JSON.stringify(value, null, 2);
    return value;
  } catch (e) {
    out.classList.add("error");
    out.textContent = String(e.message ?? e);
    return null;
  }
}

function drawBar(stack) {
  const bar = $("adjust-bar");
  bar.replaceChildren();
  if (!stack) return;
  for (const c of ["dispatch", "frontend", "backend", "horizontal_waste"]) {
    const s = document.createElement("span");
    s.className = c;
    s.style.width = `${100 * stack[c]}%`;
    s.title = `${c} ${stack[c].toFixed(3)}`;
    bar.append(s);
  }
}

await init();

$("adjust").onclick = () =>
  drawBar(show($("adjust-out"), () => adjustStack(variant(), num("a-d"), num("a-fe"), num("a-be"))));

$("predict").onclick = () =>
  show($("predict-out"), () =>
    predictPair(
      variant(),
      new Float64Array([num("i-d"), num("i-fe"), num("i-be")]),
      new Float64Array([num("j-d"), num("j-fe"), num("j-be")]),
    ),
  );

$("schedule").onclick = () => show($("schedule-out"), () => schedulePairs(variant(), $("apps").value));

$("adjust").click();

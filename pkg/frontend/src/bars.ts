/** Per-object similarity bars (DOM, no canvas). */

export function renderBars(
  root: HTMLElement,
  names: string[],
  values: number[],
): void {
  root.textContent = "";
  names.forEach((name, i) => {
    const row = document.createElement("div");
    row.className = "bar-row";

    const label = document.createElement("span");
    label.className = "bar-label";
    label.textContent = name;

    const track = document.createElement("div");
    track.className = "bar-track";
    const fill = document.createElement("div");
    fill.className = "bar-fill";
    const v = Math.min(1, Math.max(0, values[i] ?? 0));
    fill.style.width = `${(v * 100).toFixed(1)}%`;
    fill.dataset.value = String(values[i] ?? 0);
    track.appendChild(fill);

    row.appendChild(label);
    row.appendChild(track);
    root.appendChild(row);
  });
}

/** Non-blocking error/info toasts. */

export function showToast(
  container: HTMLElement,
  message: string,
  kind: "error" | "info" = "error",
  ttlMs = 4000,
): HTMLElement {
  const el = document.createElement("div");
  el.className = `toast toast-${kind}`;
  el.textContent = message;
  container.appendChild(el);
  setTimeout(() => el.remove(), ttlMs);
  return el;
}

/** Boot: resolve the service base URL, start polling, wire the controls.
 *
 * The base URL can be injected at load time either via a global
 * (window.FLOWSENTINEL_API = "http://host:port") or an ?api= query
 * parameter; it defaults to the service's standard loopback address.
 */

import { ApiClient } from "./api.js";
import { Store } from "./state.js";
import { applyState, resolveBaseUrl } from "./ui.js";

function boot(): void {
  const injected = (window as unknown as { FLOWSENTINEL_API?: unknown }).FLOWSENTINEL_API;
  const baseUrl = resolveBaseUrl(window.location.search, injected);
  const api = new ApiClient(baseUrl);
  const store = new Store({
    api,
    onChange: (state) => applyState(document, state),
  });

  const baseLine = document.getElementById("base-url");
  if (baseLine) baseLine.textContent = baseUrl;

  const slider = document.getElementById("threshold-slider") as HTMLInputElement | null;
  if (slider) {
    slider.addEventListener("input", () => {
      void store.setThreshold(Number(slider.value));
    });
  }

  const addForm = document.getElementById("add-source-form") as HTMLFormElement | null;
  const sourceInput = document.getElementById("source-input") as HTMLInputElement | null;
  if (addForm && sourceInput) {
    addForm.addEventListener("submit", (event) => {
      event.preventDefault();
      const source = sourceInput.value.trim();
      if (!source) return;
      if (!window.confirm(`Block traffic from "${source}"?`)) return;
      sourceInput.value = "";
      void store.addSource(source);
    });
  }

  const blocklistBody = document.getElementById("blocklist-body");
  if (blocklistBody) {
    blocklistBody.addEventListener("click", (event) => {
      const target = event.target as HTMLElement;
      if (!target.classList.contains("remove-source")) return;
      const source = target.dataset["source"];
      if (!source) return;
      if (!window.confirm(`Unblock "${source}"?`)) return;
      void store.removeSource(source);
    });
  }

  const modelForm = document.getElementById("model-form") as HTMLFormElement | null;
  const modelPathInput = document.getElementById("model-path-input") as HTMLInputElement | null;
  if (modelForm && modelPathInput) {
    modelForm.addEventListener("submit", (event) => {
      event.preventDefault();
      const path = modelPathInput.value.trim();
      if (!path) return;
      void store.switchModel(path);
    });
  }

  const errorLine = document.getElementById("error-line");
  if (errorLine) {
    errorLine.addEventListener("click", () => store.clearError());
  }

  void store.refreshAll();
  store.start();
}

document.addEventListener("DOMContentLoaded", boot);

// DOM wiring for the design loop: a 3x3 ring (current logo centered, 8
// candidates around it), the amount slider at the bottom, and semantic
// direction sliders on the right.

import { StudioClient } from "./api.js";
import { CandidateMode, DesignStore } from "./state.js";

const CELL_ORDER = [0, 1, 2, 3, -1, 4, 5, 6, 7]; // -1 marks the center cell

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function imgFrom(b64: string, className: string): HTMLImageElement {
  const img = el("img", className);
  img.src = `data:image/png;base64,${b64}`;
  return img;
}

export class StudioApp {
  readonly store: DesignStore;
  private root: HTMLElement;

  constructor(root: HTMLElement, client: StudioClient, sessionSeed = Date.now() >>> 0) {
    this.root = root;
    this.store = new DesignStore(client, sessionSeed);
    this.store.subscribe(() => this.render());
  }

  async start(): Promise<void> {
    await this.store.start();
    await this.store.loadCandidates("vicinity");
  }

  private async safely(action: () => Promise<void>): Promise<void> {
    try {
      await action();
    } catch (err) {
      this.renderError(String(err), action);
    }
  }

  private renderError(message: string, retry: () => Promise<void>): void {
    const bar = this.root.querySelector(".error-bar") ?? el("div", "error-bar");
    bar.textContent = `service error: ${message} `;
    const btn = el("button", "retry", "retry");
    btn.addEventListener("click", () => {
      bar.remove();
      void this.safely(retry);
    });
    bar.appendChild(btn);
    this.root.prepend(bar);
  }

  render(): void {
    const s = this.store;
    this.root.textContent = "";

    const toolbar = el("div", "toolbar");
    for (const mode of ["vicinity", "transfer"] as CandidateMode[]) {
      const btn = el("button", `mode-toggle${s.candidateMode === mode ? " active" : ""}`, mode);
      btn.dataset.mode = mode;
      btn.addEventListener("click", () => void this.safely(() => s.loadCandidates(mode)));
      toolbar.appendChild(btn);
    }
    const undoBtn = el("button", "undo", "undo");
    undoBtn.disabled = s.history.length === 0;
    undoBtn.addEventListener("click", () => s.undo());
    const redoBtn = el("button", "redo", "redo");
    redoBtn.disabled = s.future.length === 0;
    redoBtn.addEventListener("click", () => s.redo());
    toolbar.append(undoBtn, redoBtn);
    this.root.appendChild(toolbar);

    const main = el("div", "main");
    main.appendChild(this.renderGrid());
    main.appendChild(this.renderDirections());
    this.root.appendChild(main);
    this.root.appendChild(this.renderAmountBar());
  }

  private renderGrid(): HTMLElement {
    const s = this.store;
    const grid = el("div", "radial-grid");
    let candidateIdx = 0;
    for (const slot of CELL_ORDER) {
      if (slot === -1) {
        const center = el("div", "cell center");
        if (s.current) center.appendChild(imgFrom(s.current.image, "logo current-logo"));
        grid.appendChild(center);
        continue;
      }
      const idx = candidateIdx++;
      const cell = el("div", `cell candidate${s.selected === idx ? " selected" : ""}`);
      cell.dataset.index = String(idx);
      const item = s.candidates[idx];
      if (item) {
        cell.appendChild(imgFrom(item.image, "logo candidate-logo"));
        cell.addEventListener("click", () =>
          void this.safely(async () => {
            s.select(idx);
            await s.previewAmount(s.amount);
          }),
        );
      }
      grid.appendChild(cell);
    }
    return grid;
  }

  private renderDirections(): HTMLElement {
    const s = this.store;
    const side = el("div", "directions");
    side.appendChild(el("h3", undefined, "semantic sliders"));
    for (const d of s.directions) {
      const row = el("div", "direction-row");
      row.appendChild(el("label", "direction-name", d.name));
      const slider = el("input", "direction-slider") as HTMLInputElement;
      slider.type = "range";
      slider.min = "-1";
      slider.max = "1";
      slider.step = "0.05";
      slider.value = "0";
      slider.dataset.direction = d.name;
      const space = d.has_z && d.has_label ? "both" : d.has_label ? "label" : "latent";
      slider.addEventListener("change", () =>
        void this.safely(() => s.previewDirection(d.name, Number(slider.value), space).then(() => undefined)),
      );
      row.appendChild(slider);
      side.appendChild(row);
    }
    return side;
  }

  private renderAmountBar(): HTMLElement {
    const s = this.store;
    const bar = el("div", "amount-bar");
    const slider = el("input", "amount-slider") as HTMLInputElement;
    slider.type = "range";
    slider.min = "0";
    slider.max = "1";
    slider.step = "0.01";
    slider.value = String(s.amount);
    slider.disabled = s.selected === null;
    slider.addEventListener("change", () =>
      void this.safely(() => s.previewAmount(Number(slider.value)).then(() => undefined)),
    );
    bar.appendChild(slider);

    const previewBox = el("div", "preview-box");
    if (s.preview) previewBox.appendChild(imgFrom(s.preview.image, "logo preview-logo"));
    bar.appendChild(previewBox);

    const confirm = el("button", "confirm", "confirm");
    confirm.disabled = s.preview === null;
    confirm.addEventListener("click", () =>
      void this.safely(async () => {
        s.commit();
        await s.loadCandidates(s.candidateMode);
      }),
    );
    bar.appendChild(confirm);
    return bar;
  }
}

import { ViewState } from "./state.js";
import { ParamSpec } from "./types.js";

// Parameter controls for the selected model. Changing a control only updates
// the ViewState; inference stays behind the run button.
export class ParamPanel {
  constructor(
    private container: HTMLElement,
    private state: ViewState,
  ) {}

  render(): void {
    this.container.innerHTML = "";
    const model = this.state.selectedModel;
    if (!model) {
      const hint = document.createElement("div");
      hint.className = "panel-hint";
      hint.textContent = "select a model to see its parameters";
      this.container.appendChild(hint);
      return;
    }
    for (const spec of model.param_schema) {
      if (spec.kind === "bool") {
        this.container.appendChild(this.buildToggle(spec));
      } else {
        this.container.appendChild(this.buildSlider(spec));
      }
    }
  }

  private buildSlider(spec: ParamSpec): HTMLElement {
    const row = document.createElement("div");
    row.className = "param-row";

    const label = document.createElement("label");
    label.textContent = spec.name;
    label.htmlFor = `param-${spec.name}`;

    const slider = document.createElement("input");
    slider.type = "range";
    slider.id = `param-${spec.name}`;
    slider.dataset.param = spec.name;
    slider.min = String(spec.min ?? 0);
    slider.max = String(spec.max ?? 1);
    slider.step = spec.kind === "int" ? "1" : "any";
    slider.value = String(this.state.paramValues[spec.name]);

    const readout = document.createElement("input");
    readout.type = "number";
    readout.className = "param-readout";
    readout.dataset.param = spec.name;
    readout.min = slider.min;
    readout.max = slider.max;
    readout.step = slider.step;
    readout.value = slider.value;

    slider.addEventListener("input", () => {
      this.state.setParam(spec.name, parseFloat(slider.value));
      const applied = this.state.paramValues[spec.name];
      readout.value = String(applied);
    });

    // typed values clamp to the declared bounds, then both controls resync
    readout.addEventListener("change", () => {
      this.state.setParam(spec.name, parseFloat(readout.value));
      const applied = this.state.paramValues[spec.name];
      readout.value = String(applied);
      slider.value = String(applied);
    });

    row.appendChild(label);
    row.appendChild(slider);
    row.appendChild(readout);
    return row;
  }

  private buildToggle(spec: ParamSpec): HTMLElement {
    const row = document.createElement("div");
    row.className = "param-row";

    const label = document.createElement("label");
    label.textContent = spec.name;
    label.htmlFor = `param-${spec.name}`;

    const toggle = document.createElement("input");
    toggle.type = "checkbox";
    toggle.id = `param-${spec.name}`;
    toggle.dataset.param = spec.name;
    toggle.checked = Boolean(this.state.paramValues[spec.name]);

    toggle.addEventListener("change", () => {
      this.state.setParam(spec.name, toggle.checked);
    });

    row.appendChild(label);
    row.appendChild(toggle);
    return row;
  }
}

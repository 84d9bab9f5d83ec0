// Slice request form: one-click presets for the two shipped scenarios plus
// a manual form that mirrors the descriptor invariants client-side. While a
// submission is in flight every control is disabled; preset descriptors are
// submitted exactly as fetched.

import { ApiError } from "./api.js";
import {
  buildDescriptor, validateForm,
  ROLES, SECURITY_LEVELS,
  type Policy, type Preset, type Role, type SecurityLevel,
  type SliceDescriptor, type SliceFormModel,
} from "./model.js";

export interface SiteOption {
  id: string;
  kind: string;
}

export interface FormHandlers {
  onSubmit(descriptor: SliceDescriptor, useCase?: number): Promise<void>;
}

function option(doc: Document, value: string, label?: string): HTMLOptionElement {
  const el = doc.createElement("option");
  el.value = value;
  el.textContent = label ?? value;
  return el;
}

function select(doc: Document, name: string,
                values: string[]): HTMLSelectElement {
  const el = doc.createElement("select");
  el.name = name;
  el.appendChild(option(doc, "", "(pick one)"));
  for (const v of values) el.appendChild(option(doc, v));
  return el;
}

function field(doc: Document, label: string, name: string,
               control: HTMLElement): HTMLElement {
  const wrap = doc.createElement("label");
  wrap.className = "field";
  const caption = doc.createElement("span");
  caption.textContent = label;
  const error = doc.createElement("span");
  error.className = "error";
  error.dataset.errorFor = name;
  wrap.appendChild(caption);
  wrap.appendChild(control);
  wrap.appendChild(error);
  return wrap;
}

function readModel(root: HTMLElement): SliceFormModel {
  const value = (name: string) =>
    (root.querySelector(`[name="${name}"]`) as HTMLInputElement
      | HTMLSelectElement).value;
  const security = {} as Record<Role, SecurityLevel>;
  for (const role of ROLES) {
    security[role] = value(`security.${role}`) as SecurityLevel;
  }
  return {
    slice_id: value("slice_id"),
    name: value("name"),
    cell_site: value("cell_site"),
    core_site: value("core_site"),
    compute_site: value("compute_site"),
    compute_units: Number(value("compute_units")),
    bandwidth_gbps: Number(value("bandwidth_gbps")),
    policy: value("policy") as Policy,
    security,
  };
}

function showErrors(root: HTMLElement,
                    errors: Record<string, string>): void {
  for (const span of root.querySelectorAll<HTMLElement>("[data-error-for]")) {
    span.textContent = errors[span.dataset.errorFor ?? ""] ?? "";
  }
}

function setBusy(root: HTMLElement, busy: boolean): void {
  for (const el of root.querySelectorAll<HTMLButtonElement>(
      "button, input, select")) {
    el.disabled = busy;
  }
}

export function renderSliceForm(doc: Document, presets: Preset[],
                                sites: SiteOption[],
                                handlers: FormHandlers): HTMLElement {
  const root = doc.createElement("form");
  root.className = "slice-form";
  root.addEventListener("submit", (e) => e.preventDefault());

  const banner = doc.createElement("div");
  banner.className = "form-banner";
  root.appendChild(banner);

  const submitGuarded = async (descriptor: SliceDescriptor,
                               useCase?: number) => {
    banner.textContent = "";
    setBusy(root, true);
    try {
      await handlers.onSubmit(descriptor, useCase);
    } catch (error) {
      if (error instanceof ApiError && error.body.field) {
        showErrors(root, { [error.body.field]: error.body.detail ?? "invalid" });
      } else if (error instanceof ApiError) {
        banner.textContent = error.message;
      } else {
        banner.textContent = String(error);
      }
    } finally {
      setBusy(root, false);
    }
  };

  const presetRow = doc.createElement("div");
  presetRow.className = "presets";
  for (const preset of presets) {
    const button = doc.createElement("button");
    button.type = "button";
    button.className = "preset";
    button.dataset.useCase = String(preset.use_case);
    button.textContent = `Use case ${preset.use_case}: `
      + preset.descriptor.name;
    // submitted verbatim: the portal never recomputes what the server sent
    button.addEventListener("click", () =>
      void submitGuarded(preset.descriptor, preset.use_case));
    presetRow.appendChild(button);
  }
  root.appendChild(presetRow);

  const byKind = (...kinds: string[]) =>
    sites.filter((s) => kinds.includes(s.kind)).map((s) => s.id);

  const idInput = doc.createElement("input");
  idInput.name = "slice_id";
  const nameInput = doc.createElement("input");
  nameInput.name = "name";
  const unitsInput = doc.createElement("input");
  unitsInput.name = "compute_units";
  unitsInput.type = "number";
  unitsInput.value = "0";
  const bwInput = doc.createElement("input");
  bwInput.name = "bandwidth_gbps";
  bwInput.type = "number";
  bwInput.value = "10";

  root.appendChild(field(doc, "Slice id", "slice_id", idInput));
  root.appendChild(field(doc, "Name", "name", nameInput));
  root.appendChild(field(doc, "Cell site", "cell_site",
                         select(doc, "cell_site", byKind("cell"))));
  root.appendChild(field(doc, "Core site", "core_site",
                         select(doc, "core_site", byKind("core"))));
  root.appendChild(field(doc, "Compute site", "compute_site",
                         select(doc, "compute_site",
                                byKind("metro", "aggregation"))));
  root.appendChild(field(doc, "Compute units", "compute_units", unitsInput));
  root.appendChild(field(doc, "Bandwidth (Gbps)", "bandwidth_gbps", bwInput));

  const policySelect = doc.createElement("select");
  policySelect.name = "policy";
  policySelect.appendChild(option(doc, "upgrade_allowed", "allow upgrades"));
  policySelect.appendChild(option(doc, "exact", "exact match"));
  root.appendChild(field(doc, "Security policy", "policy", policySelect));

  for (const role of ROLES) {
    const sec = doc.createElement("select");
    sec.name = `security.${role}`;
    for (const level of SECURITY_LEVELS) sec.appendChild(option(doc, level));
    root.appendChild(field(doc, `${role} security`, `security.${role}`, sec));
  }

  const submit = doc.createElement("button");
  submit.type = "button";
  submit.className = "submit";
  submit.textContent = "Request slice";
  submit.addEventListener("click", () => {
    const model = readModel(root);
    const errors = validateForm(model);
    showErrors(root, errors);
    if (Object.keys(errors).length === 0) {
      void submitGuarded(buildDescriptor(model));
    }
  });
  root.appendChild(submit);
  return root;
}

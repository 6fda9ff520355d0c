/**
 * DOM wiring for the explorer. The analyst adds known events one at a
 * time, watches the candidate count shrink, inspects a candidate's
 * timeline and co-travellers, and renders unicity curves; each answer
 * informs the next constraint.
 */

import { ApiClient, ServiceError } from "./api.js";
import { buildConstraint, describeConstraint, type ConstraintFormInput } from "./constraints.js";
import { Session } from "./session.js";
import { candidatesView, chartSvg, unicityChartModel } from "./views.js";

// API origin: same host by default, overridable as ?api=http://host:port
const apiBase = new URLSearchParams(window.location.search).get("api") ?? "";
const client = new ApiClient(apiBase);
const session = new Session(client);

const $ = <T extends HTMLElement>(sel: string): T => {
  const el = document.querySelector<T>(sel);
  if (!el) throw new Error(`missing element ${sel}`);
  return el;
};

const kindSelect = $<HTMLSelectElement>("#kind");
const fieldsBox = $("#fields");
const errorsBox = $("#form-errors");
const constraintsBox = $("#constraints");
const bannerBox = $("#banner");
const hintBox = $("#hint");
const tableBox = $("#candidates");
const timelineBox = $("#timeline");
const chartBox = $("#chart");
const serviceErrorBox = $("#service-error");

const FIELDS: Record<string, { name: keyof ConstraintFormInput; label: string; placeholder?: string }[]> = {
  touchOnBetween: [
    { name: "date", label: "date", placeholder: "2018-05-04" },
    { name: "lo", label: "from", placeholder: "05:00" },
    { name: "hi", label: "to", placeholder: "07:00" },
  ],
  touchOnAt: [
    { name: "at", label: "timestamp", placeholder: "2018-05-04T05:11:18" },
    { name: "toleranceSeconds", label: "tolerance (s)", placeholder: "0" },
  ],
  visitedStop: [
    { name: "stopId", label: "stop id", placeholder: "19936" },
    { name: "from", label: "from (optional)", placeholder: "" },
    { name: "to", label: "to (optional)", placeholder: "" },
  ],
  cardTypeIs: [{ name: "type", label: "card type", placeholder: "51" }],
  cardTypeIsNot: [{ name: "type", label: "card type", placeholder: "3" }],
  firstSeenBefore: [{ name: "date", label: "date" }],
  firstSeenAfter: [{ name: "date", label: "date" }],
  lastSeenBefore: [{ name: "date", label: "date" }],
  lastSeenAfter: [{ name: "date", label: "date" }],
  minEventCount: [{ name: "k", label: "minimum events", placeholder: "10" }],
};

function renderFields(): void {
  fieldsBox.innerHTML = "";
  for (const field of FIELDS[kindSelect.value] ?? []) {
    const label = document.createElement("label");
    label.textContent = field.label;
    const input = document.createElement("input");
    input.name = field.name;
    input.placeholder = field.placeholder ?? "";
    label.appendChild(input);
    fieldsBox.appendChild(label);
  }
}

function formInput(): ConstraintFormInput {
  const input: ConstraintFormInput = { kind: kindSelect.value };
  fieldsBox.querySelectorAll("input").forEach((el) => {
    const name = el.name as keyof ConstraintFormInput;
    if (el.value.trim() !== "") input[name] = el.value.trim();
  });
  return input;
}

function showServiceError(err: unknown): void {
  if (err instanceof DOMException && err.name === "AbortError") return;
  const message = err instanceof ServiceError
    ? `${err.message} (${err.code})`
    : String(err);
  serviceErrorBox.textContent = message;
  serviceErrorBox.hidden = false;
}

function renderSession(): void {
  serviceErrorBox.hidden = true;
  constraintsBox.innerHTML = "";
  session.constraints.forEach((c, i) => {
    const li = document.createElement("li");
    li.textContent = describeConstraint(c);
    const remove = document.createElement("button");
    remove.textContent = "×";
    remove.addEventListener("click", () => {
      session.removeConstraint(i).then(renderSession, showServiceError);
    });
    li.appendChild(remove);
    constraintsBox.appendChild(li);
  });

  const response = session.lastResponse;
  if (!response) return;
  const view = candidatesView(response);
  bannerBox.textContent = view.banner;
  bannerBox.dataset.state = view.state;
  hintBox.textContent = view.hint ?? "";
  tableBox.innerHTML = "";
  const head = document.createElement("tr");
  head.innerHTML = "<th>card</th><th>type</th><th>first seen</th>"
    + "<th>last seen</th><th>events</th><th></th><th></th>";
  tableBox.appendChild(head);
  for (const row of view.rows) {
    const tr = document.createElement("tr");
    tr.innerHTML = `<td>${row.cardId}</td><td><span class="badge">${row.typeBadge}</span></td>`
      + `<td>${row.firstSeen}</td><td>${row.lastSeen}</td><td>${row.eventCount}</td>`;
    const inspect = document.createElement("button");
    inspect.textContent = "timeline";
    inspect.addEventListener("click", () => {
      session.selectCard(row.cardId).then(renderTimeline, showServiceError);
    });
    const exclude = document.createElement("button");
    exclude.textContent = "exclude this type";
    exclude.addEventListener("click", () => {
      session.addConstraint({ kind: "cardTypeIsNot", type: row.cardType })
        .then(renderSession, showServiceError);
    });
    const td1 = document.createElement("td");
    td1.appendChild(inspect);
    const td2 = document.createElement("td");
    td2.appendChild(exclude);
    tr.appendChild(td1);
    tr.appendChild(td2);
    tableBox.appendChild(tr);
  }
  if (view.truncated) {
    const tr = document.createElement("tr");
    tr.innerHTML = `<td colspan="7">preview truncated; total is exact</td>`;
    tableBox.appendChild(tr);
  }
}

function renderTimeline(): void {
  const tl = session.selectedTimeline;
  if (!tl) return;
  const lines = tl.events.map((e) => {
    const off = e.offTime ? ` → off ${e.offTime} stop ${e.offStopId}` : "";
    return `<li>on ${e.onTime} stop ${e.onStopId}${off}</li>`;
  });
  timelineBox.innerHTML = `<h3>card ${tl.cardId}</h3>`
    + `<p>first seen ${tl.firstSeen} · last seen ${tl.lastSeen}</p>`
    + `<ul>${lines.join("")}</ul>`;
}

$("#add").addEventListener("click", () => {
  const result = buildConstraint(formInput());
  if (!result.ok) {
    errorsBox.textContent = result.errors.join("; ");
    return;
  }
  errorsBox.textContent = "";
  session.addConstraint(result.constraint).then(renderSession, showServiceError);
});

$("#export-trace").addEventListener("click", () => {
  $<HTMLTextAreaElement>("#trace").value = session.exportTrace();
});

$("#import-trace").addEventListener("click", () => {
  try {
    session.importTrace($<HTMLTextAreaElement>("#trace").value);
  } catch (err) {
    errorsBox.textContent = String(err);
    return;
  }
  session.refresh().then(renderSession, showServiceError);
});

$("#run-unicity").addEventListener("click", async () => {
  try {
    const jobId = await client.startUnicity({
      granularities: ["exact", "zeroSeconds", "nearestFiveMinutes",
                      "zeroMinutes", "zeroHour"],
      locations: [true, false],
      cardinalities: [1, 2, 3, 4, 5],
      seed: 1,
    });
    chartBox.innerHTML = "<p>running…</p>";
    const poll = async (): Promise<void> => {
      const status = await client.jobStatus(jobId);
      if (status.status === "running") {
        setTimeout(() => void poll().catch(showServiceError), 500);
        return;
      }
      if (status.status !== "done" || !status.report) {
        throw new ServiceError(status.error ?? "job failed", "job_error", 500);
      }
      session.chartRows = status.report;
      chartBox.innerHTML = chartSvg(unicityChartModel(status.report));
    };
    await poll();
  } catch (err) {
    showServiceError(err);
  }
});

kindSelect.addEventListener("change", renderFields);
renderFields();
session.refresh().then(renderSession, showServiceError);

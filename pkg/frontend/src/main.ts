import { AnnotationApi } from "./api";
import { App } from "./app";

// Bootstrap: same-origin API, bearer token kept in localStorage. A tiny
// inline token prompt stands in for accounts; the roster file on the server
// is the actual authority.

const TOKEN_KEY = "mqud-token";

function mount(token: string): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const api = new AnnotationApi(window.location.origin, token);
  void new App(root, api, localStorage).start();
}

function promptForToken(): void {
  const root = document.getElementById("app");
  if (!root) return;
  root.innerHTML = "";
  const form = document.createElement("form");
  form.className = "token-form";
  const label = document.createElement("label");
  label.textContent = "Annotator token";
  const input = document.createElement("input");
  input.type = "password";
  input.autofocus = true;
  const button = document.createElement("button");
  button.type = "submit";
  button.textContent = "Start annotating";
  form.append(label, input, button);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const token = input.value.trim();
    if (!token) return;
    localStorage.setItem(TOKEN_KEY, token);
    mount(token);
  });
  root.appendChild(form);
}

const saved = localStorage.getItem(TOKEN_KEY);
if (saved) {
  mount(saved);
} else {
  promptForToken();
}

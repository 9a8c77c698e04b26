import { AnswerSubmission, ApiError, Client, QuestionPayload, Stats } from './api.js';
import { overlayRect } from './overlay.js';

type View = 'loading' | 'question' | 'drained';

// Everything rendered is derived from the last API responses plus the form
// fields the user is currently editing; reloading the page rebuilds the
// same view from the same server state.
interface AppState {
  view: View;
  question: QuestionPayload | null;
  stats: Stats | null;
  notice: string;
  formError: string;
  retryMessage: string; // nonempty shows the banner
}

const SKELETON = `
  <header>
    <h1>visquest</h1>
    <div id="stats">
      <span>asked <b id="stat-total">0</b></span>
      <span>answered <b id="stat-answered">0</b></span>
      <span>no answer <b id="stat-no-answer">0</b></span>
      <span>learned <b id="stat-successful">0</b></span>
    </div>
  </header>
  <div id="retry-banner" hidden>
    <span id="retry-message"></span>
    <button id="retry" type="button">retry</button>
  </div>
  <main>
    <p id="loading">loading&hellip;</p>
    <p id="drained" hidden>all questions answered</p>
    <section id="question-view" hidden>
      <p id="notice" hidden></p>
      <p id="question-text"></p>
      <p class="context">
        target word <b id="target-word"></b>
        &middot; <span id="remaining"></span> in queue
      </p>
      <div id="image-frame">
        <img id="scene" alt="scene under discussion">
        <div id="overlay"></div>
      </div>
      <form id="answer-form">
        <label class="answer-row">
          your answer
          <input id="answer-input" autocomplete="off">
        </label>
        <label class="flag-row">
          <input type="checkbox" id="no-answer"> do not understand the question
        </label>
        <fieldset id="rating">
          <legend>how relevant is the question to the outlined region?</legend>
          ${[1, 2, 3, 4, 5]
            .map(
              (n) =>
                `<label><input type="radio" name="rating" value="${n}">${n}</label>`,
            )
            .join('\n          ')}
        </fieldset>
        <p id="form-error" hidden></p>
        <button id="submit" type="submit">submit</button>
      </form>
    </section>
  </main>
`;

export class App {
  private state: AppState = {
    view: 'loading',
    question: null,
    stats: null,
    notice: '',
    formError: '',
    retryMessage: '',
  };
  private retryAction: (() => Promise<void>) | null = null;
  private submitting = false;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: Client,
  ) {
    root.innerHTML = SKELETON;
    this.el<HTMLFormElement>('answer-form').addEventListener('submit', (ev) => {
      ev.preventDefault();
      void this.handleSubmit();
    });
    this.el<HTMLButtonElement>('retry').addEventListener('click', () => {
      void this.retry();
    });
    // ticking the flag and typing an answer are mutually exclusive
    this.el<HTMLInputElement>('no-answer').addEventListener('change', () => {
      const flag = this.el<HTMLInputElement>('no-answer');
      const input = this.el<HTMLInputElement>('answer-input');
      input.disabled = flag.checked;
      if (flag.checked) input.value = '';
    });
    this.el<HTMLImageElement>('scene').addEventListener('load', () => {
      this.repositionOverlay();
    });
    window.addEventListener('resize', () => this.repositionOverlay());
  }

  async start(): Promise<void> {
    await this.loadNext();
  }

  /** Re-run whatever last failed; wired to the banner button. */
  async retry(): Promise<void> {
    const action = this.retryAction;
    this.retryAction = null;
    this.state.retryMessage = '';
    this.render();
    if (action) await action();
  }

  private async loadNext(): Promise<void> {
    try {
      const [question, stats] = await Promise.all([
        this.client.next(),
        this.client.stats(),
      ]);
      this.state.question = question;
      this.state.stats = stats;
      this.state.view = question === null ? 'drained' : 'question';
      this.state.formError = '';
      this.clearForm();
    } catch (err) {
      this.showRetry('could not reach the server', () => this.loadNext());
      return;
    }
    this.render();
  }

  private async handleSubmit(): Promise<void> {
    if (this.submitting || this.state.question === null) return;
    const form = this.readForm(this.state.question.record_id);
    if ('error' in form) {
      this.state.formError = form.error;
      this.render();
      return;
    }
    this.submitting = true;
    this.el<HTMLButtonElement>('submit').disabled = true;
    try {
      await this.client.submit(form);
      this.state.notice = '';
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // someone else got there first; tell the user and move on
        this.state.notice = 'that question was already answered elsewhere';
      } else {
        this.showRetry('submit failed; your input is still here', () =>
          this.handleSubmit(),
        );
        return;
      }
    } finally {
      this.submitting = false;
      this.el<HTMLButtonElement>('submit').disabled = false;
    }
    this.state.formError = '';
    await this.loadNext();
  }

  private readForm(
    recordId: string,
  ): AnswerSubmission | { error: string } {
    const text = this.el<HTMLInputElement>('answer-input').value.trim();
    const flag = this.el<HTMLInputElement>('no-answer').checked;
    const picked = this.root.querySelector<HTMLInputElement>(
      'input[name="rating"]:checked',
    );
    if (text !== '' && flag) {
      return { error: 'give an answer or tick "do not understand", not both' };
    }
    if (text === '' && !flag) {
      return { error: 'type an answer or tick "do not understand"' };
    }
    if (picked === null) {
      return { error: 'pick a relevance rating first' };
    }
    const rating = Number(picked.value);
    return flag
      ? { record_id: recordId, no_answer: true, rating }
      : { record_id: recordId, answer: text, rating };
  }

  private clearForm(): void {
    this.el<HTMLInputElement>('answer-input').value = '';
    this.el<HTMLInputElement>('answer-input').disabled = false;
    this.el<HTMLInputElement>('no-answer').checked = false;
    for (const radio of this.root.querySelectorAll<HTMLInputElement>(
      'input[name="rating"]',
    )) {
      radio.checked = false;
    }
  }

  private showRetry(message: string, action: () => Promise<void>): void {
    this.state.retryMessage = message;
    this.retryAction = action;
    this.render();
  }

  /** Redraw everything from state; no incremental bookkeeping to drift. */
  private render(): void {
    const { view, question, stats, notice, formError, retryMessage } =
      this.state;
    this.el('loading').hidden = view !== 'loading';
    this.el('drained').hidden = view !== 'drained';
    this.el('question-view').hidden = view !== 'question';

    const banner = this.el('retry-banner');
    banner.hidden = retryMessage === '';
    this.el('retry-message').textContent = retryMessage;

    if (stats !== null) {
      this.el('stat-total').textContent = String(stats.total);
      this.el('stat-answered').textContent = String(stats.answered);
      this.el('stat-no-answer').textContent = String(stats.no_answer);
      this.el('stat-successful').textContent = String(stats.successful);
    }

    const noticeEl = this.el('notice');
    noticeEl.hidden = notice === '';
    noticeEl.textContent = notice;

    const errorEl = this.el('form-error');
    errorEl.hidden = formError === '';
    errorEl.textContent = formError;

    if (view === 'question' && question !== null) {
      this.el('question-text').textContent = question.question;
      this.el('target-word').textContent = question.target_word;
      this.el('remaining').textContent = String(question.remaining);
      const img = this.el<HTMLImageElement>('scene');
      const url = this.client.imageUrl(question);
      if (img.getAttribute('src') !== url) img.setAttribute('src', url);
      this.repositionOverlay();
    }
  }

  /** Scale the region box from natural to displayed coordinates. */
  repositionOverlay(): void {
    const question = this.state.question;
    if (question === null) return;
    const img = this.el<HTMLImageElement>('scene');
    const displayedWidth = img.clientWidth || question.width;
    const displayedHeight = img.clientHeight || question.height;
    const rect = overlayRect(
      question.region,
      question.width,
      question.height,
      displayedWidth,
      displayedHeight,
    );
    const overlay = this.el('overlay');
    overlay.style.left = `${rect.left}px`;
    overlay.style.top = `${rect.top}px`;
    overlay.style.width = `${rect.width}px`;
    overlay.style.height = `${rect.height}px`;
  }

  private el<T extends HTMLElement = HTMLElement>(id: string): T {
    const found = this.root.querySelector<T>(`#${id}`);
    if (found === null) throw new Error(`missing #${id} in the app skeleton`);
    return found;
  }
}

export function mountApp(root: HTMLElement, client: Client): App {
  const app = new App(root, client);
  void app.start();
  return app;
}

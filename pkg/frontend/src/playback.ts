// Playback of recorded .runlog.jsonl files: because the view is a pure
// function of the event prefix, scrubbing is re-reduction up to a position.

import type { RunEvent } from "./types.js";
import { parseRunLog } from "./types.js";
import type { RunView } from "./view.js";
import { reduceEvents } from "./view.js";

export class Playback {
  readonly events: RunEvent[];

  constructor(events: RunEvent[]) {
    this.events = events;
  }

  static fromText(text: string): Playback {
    return new Playback(parseRunLog(text));
  }

  get length(): number {
    return this.events.length;
  }

  /** View after the first `position` events (0 = empty view). */
  viewAt(position: number): RunView {
    const clamped = Math.max(0, Math.min(position, this.events.length));
    return reduceEvents(this.events.slice(0, clamped));
  }

  finalView(): RunView {
    return this.viewAt(this.events.length);
  }
}

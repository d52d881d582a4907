/**
 * Optimistic mutation helper: flip the UI first, call the API, and put
 * things back if the call fails. The caller supplies the snapshot/restore
 * pair; this just sequences them around the request.
 */

export async function optimistic<T = void>(opts: {
  apply: () => void;
  rollback: () => void;
  mutate: () => Promise<T>;
  onError?: (err: unknown) => void;
}): Promise<T | undefined> {
  opts.apply();
  try {
    return await opts.mutate();
  } catch (err) {
    opts.rollback();
    opts.onError?.(err);
    return undefined;
  }
}

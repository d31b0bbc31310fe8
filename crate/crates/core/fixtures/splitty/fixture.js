// Shared behavior for the static fixture sites. Mirrors the declarative
// data attributes understood by the in-process simulated browser.
document.addEventListener('click', function (e) {
  var t = e.target.closest('[data-nav]');
  if (t) { location.href = t.getAttribute('data-nav'); }
});
document.addEventListener('submit', function (e) {
  var f = e.target, msg = f.getAttribute('data-console-error-if-empty');
  if (!msg) { return; }
  for (var i = 0; i < f.elements.length; i++) {
    var el = f.elements[i];
    var textual = el.tagName === 'TEXTAREA' ||
      (el.tagName === 'INPUT' && ['submit', 'button', 'reset', 'hidden'].indexOf(el.type) < 0);
    if (textual && !el.value.trim()) {
      console.error(msg);
      e.preventDefault();
      return;
    }
  }
});

//PVSCL:IFCOND(Target)
class TextQuoteSelector {
  constructor (exact, prefix, suffix) {
    this.exact = exact
    this.prefix = prefix
    this.suffix = suffix
  }
}
function describeTarget (page, selection) {
  return new TextQuoteSelector(selection.exact, selection.prefix, selection.suffix)
}
//PVSCL:ENDCOND
